//! Specialization regressed on business density plus four placebo census
//! variables: only density should carry a signal.
//!
//!     cargo run --example differentiation_table

use std::collections::BTreeMap;

use scenekit::panel_fe::{fit_fe, format_table, FeOptions, PanelDataset};
use scenekit::simulate::{gen_differentiation_panel, DifferentiationConfig, DIFFERENTIATION_PLACEBOS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sim = gen_differentiation_panel(&DifferentiationConfig::default())?;
    let mut regressors = vec!["business_density"];
    regressors.extend(DIFFERENTIATION_PLACEBOS);
    let data = PanelDataset::from_wide(&sim.panel, "specialization", &regressors)?;
    let plain = fit_fe(&data, FeOptions::default())?;
    let with_years = fit_fe(&data, FeOptions { period_effects: true })?;
    println!("true density gain: {}", sim.truth.gain);
    println!("{}", format_table(&[plain, with_years], &BTreeMap::new()));
    Ok(())
}
