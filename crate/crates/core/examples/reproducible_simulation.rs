//! Every generator is a pure function of its seed: the same seed gives the
//! same bytes on any thread count, and named substreams keep unrelated draws
//! independent.
//!
//!     cargo run --example reproducible_simulation

use sha2::{Digest, Sha256};

use scenekit::rng::substream_seed;
use scenekit::simulate::{gen_development_panel, DevelopmentConfig};

fn digest(seed: u64, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let csv = pool.install(|| gen_development_panel(&DevelopmentConfig::table1_signs(seed)).unwrap().panel.to_csv());
    hex::encode(Sha256::digest(csv.as_bytes()))[..16].to_string()
}

fn main() {
    for seed in [1, 2] {
        let (one, many) = (digest(seed, 1), digest(seed, 8));
        println!("seed {seed}: 1 thread {one}, 8 threads {many}, identical: {}", one == many);
    }
    println!("substreams of seed 1: a → {:016x}, b → {:016x}", substream_seed(1, "a"), substream_seed(1, "b"));
}
