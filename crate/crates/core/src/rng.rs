//! Deterministic random streams.
//!
//! All stochastic code draws from ChaCha8 streams whose 256-bit seeds are
//! derived by SHA-256 over `(seed, key)`. A key names an entity, period or
//! other unit of work, so streams do not depend on generation order or on
//! how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stream for `key` under the master `seed`.
pub fn substream(seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// A derived 64-bit seed, for APIs that take a plain seed.
pub fn substream_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
