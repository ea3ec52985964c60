//! Scene performance scores for two simulated cities, z-scored per year and
//! averaged per city: the urbane dimensions drift up in the growing city.
//!
//!     cargo run --example scene_trends [-- OUT_DIR]

use std::collections::BTreeMap;

use scenekit::scenescore::{group_means, performance_scores, zscore_by_period};
use scenekit::simulate::{gen_amenity_panel, AmenitySimConfig};
use scenekit::svg::{self, Chart, Series};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sim = gen_amenity_panel(&AmenitySimConfig::default())?;
    let raw = performance_scores(&sim.panel, &sim.weights)?;
    let z = zscore_by_period(&raw)?;
    let city = |area: &str| area.split_once(':').map(|(c, _)| c.to_string());
    let means = group_means(&z, city)?;

    let mut lines: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    println!("{:<10} {:>6} {:>16} {:>10}", "city", "year", "self_expression", "tradition");
    for ((g, y, d), (m, _)) in &means {
        if d == "self_expression" {
            let tradition = means[&(g.clone(), *y, "tradition".to_string())].0;
            println!("{g:<10} {y:>6} {m:>16.3} {tradition:>10.3}");
            lines.entry(g.clone()).or_default().push((*y as f64, *m));
        }
    }

    if let Some(dir) = std::env::args().nth(1) {
        let chart = Chart {
            title: "self-expression, mean z-score by city".into(),
            x_label: "year".into(),
            y_label: "z".into(),
            series: lines.into_iter().map(|(g, pts)| Series::line(g, pts)).collect(),
        };
        std::fs::create_dir_all(&dir)?;
        std::fs::write(format!("{dir}/scene_trends.svg"), svg::render(&chart))?;
        std::fs::write(format!("{dir}/scores_z.csv"), z.to_csv())?;
    }
    Ok(())
}
