//! Change in each area's self-expression z-score over a decade, cut into
//! four natural-breaks classes, as a choropleth legend would show them.
//!
//!     cargo run --example change_map_classes

use scenekit::scenescore::{jenks_classify, performance_scores, score_change, zscore_by_period};
use scenekit::simulate::{gen_amenity_panel, AmenitySimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sim = gen_amenity_panel(&AmenitySimConfig::default())?;
    let z = zscore_by_period(&performance_scores(&sim.panel, &sim.weights)?)?;
    let change = score_change(&z, 2008, 2017)?;
    let rows = change.dimension("self_expression");
    let values: Vec<f64> = rows.iter().map(|(_, v)| *v).collect();
    let jenks = jenks_classify(&values, 4)?;

    println!("breaks (min, class uppers): {:?}", jenks.breaks.iter().map(|b| (b * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    println!("within-class sum of squares: {:.4}", jenks.objective);
    for class in 1..=4 {
        let members: Vec<&str> = rows.iter().zip(&jenks.classes).filter(|(_, c)| **c == class).map(|((a, _), _)| *a).collect();
        let toronto = members.iter().filter(|a| a.starts_with("toronto")).count();
        println!("class {class}: {:>2} areas ({toronto} in toronto)", members.len());
    }
    Ok(())
}
