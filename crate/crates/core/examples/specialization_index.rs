//! Depth-weighted specialization: the two-tract worked example, then yearly
//! city means over a simulated review log whose categories grow deeper.
//!
//!     cargo run --example specialization_index

use std::collections::BTreeMap;

use scenekit::data::Taxonomy;
use scenekit::simulate::{gen_specialization_events, SpecializationSimConfig};
use scenekit::specialization::{depth_weights, specialization_index, specialization_series, SeriesConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tax = Taxonomy::from_edges(
        [
            ("food", None),
            ("nightlife", None),
            ("shopping", None),
            ("arts", None),
            ("services", None),
            ("restaurants", Some("food")),
            ("japanese", Some("restaurants")),
            ("bars", Some("nightlife")),
        ],
        true,
    )?;
    let w = depth_weights(&tax);
    let (a, _) = specialization_index(["food", "nightlife", "shopping", "arts", "services"], &w)?;
    let (b, _) = specialization_index(["japanese", "bars"], &w)?;
    println!("five root categories: {a}; japanese + bars: {b}\n");

    let sim = gen_specialization_events(&SpecializationSimConfig::default())?;
    let grouping: BTreeMap<String, String> = sim
        .events
        .areas()
        .into_iter()
        .map(|a| (a.to_string(), a.split(':').next().unwrap().to_string()))
        .collect();
    for (label, config) in [
        ("cumulative", SeriesConfig::default()),
        ("3-year expiry", SeriesConfig { expiry_years: Some(3), ..Default::default() }),
    ] {
        println!("{label}:");
        let series = specialization_series(&sim.events, &sim.taxonomy, &grouping, config)?;
        for g in &series.groups {
            println!("  {:<8} {} {:.3} ± {:.3} ({} areas)", g.group_id, g.year, g.mean, g.se.unwrap_or(0.0), g.n_areas);
        }
    }
    Ok(())
}
