//! Early, middle and late adopters compared on market size and education:
//! early locations go to big metros, later ones to more educated regions.
//!
//!     cargo run --example adoption_cohorts

use scenekit::diffusion::cohort_summary;
use scenekit::simulate::{gen_diffusion_series, DiffusionSimConfig, ShapeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = DiffusionSimConfig {
        covariates: true,
        ..DiffusionSimConfig::new(5, 300, ShapeConfig::default_s())
    };
    let sim = gen_diffusion_series(&config)?;
    let stats = cohort_summary(&sim.openings, &[100, 100, 100], &["metro_size", "pct_ba"])?;
    for c in &stats.cohorts {
        let show: Vec<String> = c
            .summaries
            .iter()
            .map(|s| format!("{} mean {:.3} median {:.3}", s.covariate, s.mean.unwrap_or(f64::NAN), s.median.unwrap_or(f64::NAN)))
            .collect();
        println!("cohort {} (openings {}..{}): {}", c.cohort, c.start + 1, c.end, show.join("; "));
    }
    Ok(())
}
