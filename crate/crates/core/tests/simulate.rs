//! Generators are pure functions of their config: same bytes regardless of
//! how many worker threads run them.

use scenekit::simulate::*;

fn on_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

fn all_outputs(seed: u64) -> Vec<String> {
    let dev = gen_development_panel(&DevelopmentConfig { n_entities: 300, ..DevelopmentConfig::table1_signs(seed) }).unwrap();
    let dif = gen_differentiation_panel(&DifferentiationConfig { seed, ..Default::default() }).unwrap();
    let mut diffusion = DiffusionSimConfig::new(seed, 500, ShapeConfig::default_hybrid());
    diffusion.covariates = true;
    let diffusion = gen_diffusion_series(&diffusion).unwrap();
    let defense = gen_defense_events(&DefenseSimConfig { seed, n_areas: 3, ..Default::default() }).unwrap();
    let spec = gen_specialization_events(&SpecializationSimConfig { seed, ..Default::default() }).unwrap();
    let amenity = gen_amenity_panel(&AmenitySimConfig { seed, ..Default::default() }).unwrap();
    vec![
        dev.panel.to_csv(),
        dif.panel.to_csv(),
        diffusion.openings.to_openings_csv(),
        diffusion.openings.to_covariates_csv(),
        defense.events.to_csv(),
        spec.events.to_csv(),
        amenity.panel.to_csv(),
    ]
}

#[test]
fn thread_count_does_not_change_output() {
    let one = on_threads(1, || all_outputs(17));
    let many = on_threads(6, || all_outputs(17));
    assert_eq!(one, many);
}

#[test]
fn seeds_matter() {
    let (a, b) = (all_outputs(1), all_outputs(2));
    for (x, y) in a.iter().zip(&b) {
        assert_ne!(x, y);
    }
}

#[test]
fn noiseless_panels_recover_the_truth_exactly() {
    use scenekit::panel_fe::{fit_fe, FeOptions, PanelDataset};
    let mut config = DevelopmentConfig::table1_signs(3);
    config.n_entities = 200;
    config.noise_sd = 0.0;
    let sim = gen_development_panel(&config).unwrap();
    for b in &sim.truth.betas {
        let data = PanelDataset::from_wide(&sim.panel, &b.dimension, &DEVELOPMENT_REGRESSORS).unwrap();
        let fit = fit_fe(&data, FeOptions::default()).unwrap();
        for (c, truth) in fit.coefficients.iter().zip([b.pct_ba, b.median_income, b.placebo]) {
            assert!((c.estimate - truth).abs() < 1e-8, "{} {}: {} vs {}", b.dimension, c.name, c.estimate, truth);
        }
    }

    let config = DifferentiationConfig { seed: 3, noise_sd: 0.0, ..Default::default() };
    let sim = gen_differentiation_panel(&config).unwrap();
    let mut regs = vec!["business_density"];
    regs.extend(DIFFERENTIATION_PLACEBOS);
    let data = PanelDataset::from_wide(&sim.panel, "specialization", &regs).unwrap();
    let fit = fit_fe(&data, FeOptions::default()).unwrap();
    assert!((fit.coefficients[0].estimate - config.gain).abs() < 1e-8);
    for c in &fit.coefficients[1..] {
        assert!(c.estimate.abs() < 1e-8);
    }
}
