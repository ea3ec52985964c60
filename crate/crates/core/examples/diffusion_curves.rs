//! Fits logistic and saturating curves to three simulated chains (S, C and
//! a steady-then-waves hybrid) and reports which shape AIC prefers.
//!
//!     cargo run --example diffusion_curves [-- OUT_DIR]

use scenekit::diffusion::{adoption_series, adoption_series_annual, classify_curve, Model};
use scenekit::simulate::{gen_diffusion_series, DiffusionSimConfig, ShapeConfig};
use scenekit::svg::{self, Chart, Series, Style};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut series = Vec::new();
    for (name, shape) in [
        ("S", ShapeConfig::default_s()),
        ("C", ShapeConfig::default_c()),
        ("hybrid", ShapeConfig::default_hybrid()),
    ] {
        let sim = gen_diffusion_series(&DiffusionSimConfig::new(3, 400, shape))?;
        // Hybrids show their waves once openings are binned by year.
        let adoption = if name == "hybrid" {
            adoption_series_annual(&sim.openings)?
        } else {
            adoption_series(&sim.openings)?
        };
        let class = classify_curve(&adoption)?;
        println!(
            "{name:<7} → {:?}  ΔAIC {:+8.1}  logistic k={:.3} t0={:.2}  saturating λ={:.3}",
            class.class, class.delta_aic, class.logistic.params[0], class.logistic.params[1], class.saturating.params[0]
        );
        let t_max = adoption.points().last().unwrap().0;
        let fitted = (0..=100).map(|i| {
            let t = t_max * i as f64 / 100.0;
            (t, Model::Logistic.eval(&class.logistic.params, t))
        });
        series.push(Series::line(format!("{name} observed"), adoption.points().to_vec()).with_style(Style::Points));
        series.push(Series::line(format!("{name} logistic"), fitted.collect()));
    }
    if let Some(dir) = std::env::args().nth(1) {
        let chart = Chart {
            title: "cumulative share of locations opened".into(),
            x_label: "years since first opening".into(),
            y_label: "share".into(),
            series,
        };
        std::fs::create_dir_all(&dir)?;
        std::fs::write(format!("{dir}/diffusion_curves.svg"), svg::render(&chart))?;
    }
    Ok(())
}
