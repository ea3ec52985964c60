//! A burst of distant-taste newcomers and the regulars' answer one quarter
//! later: the tension/structure series, the lagged-correlation permutation
//! test and the proportional-response slope, with and without a response.
//!
//!     cargo run --release --example defense_response

use scenekit::defense::{build_series, test_significant_response, test_structural_response, DefenseConfig};
use scenekit::simulate::{gen_defense_events, DefenseSimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for gain in [0.8, 0.0] {
        let sim = gen_defense_events(&DefenseSimConfig { gain, seed: 4, ..Default::default() })?;
        let config = DefenseConfig::default();
        let (series, profile) = build_series(&sim.events, "area01", &sim.taxonomy, &config)?;
        let response = test_structural_response(&series, 4, 2000, 4)?;
        let slope = test_significant_response(&series)?;
        println!("gain {gain}: baseline top categories {:?}", profile.top_categories);
        for (i, (t, s)) in series.tension.iter().zip(&series.structure).enumerate().skip(4).take(6) {
            println!("  {}  T {t:>4}  S {s:>4}", series.period.label(series.first_period + i as i64));
        }
        println!(
            "  best lag {} (r = {:.3}), permutation p = {:.4}; slope {:.3} (p = {:.2e})\n",
            response.best_lag, response.correlation, response.p_value, slope.slope, slope.p_value
        );
    }
    Ok(())
}
