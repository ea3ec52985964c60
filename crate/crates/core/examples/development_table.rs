//! Within-area regressions of each scene dimension on education, income and
//! a placebo, with entity-clustered standard errors, printed as a table next
//! to the generating coefficients.
//!
//!     cargo run --release --example development_table [-- SEED]

use std::collections::BTreeMap;

use scenekit::panel_fe::{fit_fe, format_table, standardize, FeOptions, PanelDataset};
use scenekit::simulate::{gen_development_panel, DevelopmentConfig, DEVELOPMENT_REGRESSORS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let sim = gen_development_panel(&DevelopmentConfig::table1_signs(seed))?;

    let mut results = Vec::new();
    for truth in &sim.truth.betas {
        let data = PanelDataset::from_wide(&sim.panel, &truth.dimension, &DEVELOPMENT_REGRESSORS)?;
        let raw = fit_fe(&data, FeOptions::default())?;
        println!(
            "{:<16} true pct_ba {:+.3}, fitted {:+.4} (se {:.4})",
            truth.dimension,
            truth.pct_ba,
            raw.coefficient("pct_ba").unwrap().estimate,
            raw.coefficient("pct_ba").unwrap().se,
        );
        let (z, _) = standardize(&data)?;
        results.push(fit_fe(&z, FeOptions::default())?);
    }
    let labels = BTreeMap::from([
        ("pct_ba".to_string(), "% with BA".to_string()),
        ("median_income".to_string(), "median income".to_string()),
    ]);
    println!("\n{}", format_table(&results, &labels));
    Ok(())
}
