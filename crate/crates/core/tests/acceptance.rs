//! Acceptance criteria, one PASS/FAIL line each with its runtime.
//!
//! Runs without the libtest harness: `cargo test --test acceptance`.
//! Exits nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use scenekit::data::Taxonomy;
use scenekit::defense::{build_series, test_structural_response, DefenseConfig};
use scenekit::diffusion::{adoption_series, classify_curve, fit_diffusion, Model, Shape};
use scenekit::panel_fe::{fit_fe, FeOptions, PanelDataset};
use scenekit::scenescore::{jenks_classify, zscore_by_period, ScoreTable};
use scenekit::simulate::*;
use scenekit::specialization::{depth_weights, specialization_index};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = o.pass && in_time;
    println!(
        "{} {id:>2} {name}: {} [{:.2}s / budget {}s{}]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" },
    );
    pass
}

fn worked_example() -> Outcome {
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
    )
    .unwrap();
    let w = depth_weights(&tax);
    let (a, _) = specialization_index(["food", "nightlife", "shopping", "arts", "services"], &w).unwrap();
    let (b, _) = specialization_index(["japanese", "bars"], &w).unwrap();
    outcome(a == 1.0 && b == 2.5, format!("tract A = {a}, tract B = {b} (exact)"))
}

fn depth_anchors() -> Outcome {
    let tax = Taxonomy::from_edges([("food", None), ("restaurants", Some("food"))], true).unwrap();
    let w = depth_weights(&tax);
    let (r, c) = (w.get("food"), w.get("restaurants"));
    outcome(r == Some(1) && c == Some(2), format!("root → {r:?}, depth 2 → {c:?}"))
}

fn lsdv_equivalence() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..50 {
        let data = common::random_panel(&mut common::rng(1000 + seed), 20, 5, 3);
        let fit = fit_fe(&data, FeOptions::default()).unwrap();
        let oracle = common::lsdv(&data);
        for (c, (b, se)) in fit.coefficients.iter().zip(oracle.beta.iter().zip(&oracle.se)) {
            worst.0 = worst.0.max((c.estimate - b).abs());
            worst.1 = worst.1.max((c.se - se).abs());
        }
    }
    outcome(
        worst.0 <= 1e-8 && worst.1 <= 1e-8,
        format!("50 panels, max |Δβ| = {:.1e}, max |ΔSE| = {:.1e} (tol 1e-8)", worst.0, worst.1),
    )
}

fn development_signs() -> Outcome {
    let fits = |seed: u64| {
        let sim = gen_development_panel(&DevelopmentConfig::table1_signs(seed)).unwrap();
        sim.truth
            .betas
            .iter()
            .map(|b| {
                let data = PanelDataset::from_wide(&sim.panel, &b.dimension, &DEVELOPMENT_REGRESSORS).unwrap();
                (b.clone(), fit_fe(&data, FeOptions::default()).unwrap())
            })
            .collect::<Vec<_>>()
    };
    let mut signs_ok = 0;
    let mut total = 0;
    for (truth, fit) in fits(0) {
        for (name, beta) in [("pct_ba", truth.pct_ba), ("median_income", truth.median_income)] {
            let c = fit.coefficient(name).unwrap();
            total += 1;
            if c.estimate.signum() == beta.signum() && c.p < 0.001 {
                signs_ok += 1;
            }
        }
    }
    let rejections: Vec<(usize, usize)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let fs = fits(10_000 + seed);
            let rejected = fs.iter().filter(|(_, f)| f.coefficient("placebo").unwrap().p < 0.05).count();
            (rejected, fs.len())
        })
        .collect();
    let (rej, tests) = rejections.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let rate = rej as f64 / tests as f64;
    outcome(
        signs_ok == total && (0.01..=0.12).contains(&rate),
        format!(
            "{signs_ok}/{total} education/income signs correct with p < 0.001; placebo rejection {rate:.3} over 200 seeds × 6 dimensions (need [0.01, 0.12])"
        ),
    )
}

fn differentiation_pattern() -> Outcome {
    let mut regs = vec!["business_density"];
    regs.extend(DIFFERENTIATION_PLACEBOS);
    let results: Vec<(bool, Vec<bool>)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let sim = gen_differentiation_panel(&DifferentiationConfig {
                seed: 20_000 + seed,
                ..Default::default()
            })
            .unwrap();
            let fit = fit_fe(&PanelDataset::from_wide(&sim.panel, "specialization", &regs).unwrap(), FeOptions::default())
                .unwrap();
            let d = fit.coefficient("business_density").unwrap();
            let placebo = DIFFERENTIATION_PLACEBOS
                .iter()
                .map(|p| fit.coefficient(p).unwrap().p < 0.05)
                .collect();
            (d.estimate > 0.0 && d.p < 0.05, placebo)
        })
        .collect();
    let density = results.iter().filter(|r| r.0).count() as f64 / 200.0;
    let rates: Vec<f64> = (0..DIFFERENTIATION_PLACEBOS.len())
        .map(|j| results.iter().filter(|r| r.1[j]).count() as f64 / 200.0)
        .collect();
    let placebo_ok = rates.iter().all(|r| (0.01..=0.12).contains(r));
    let shown: Vec<String> = DIFFERENTIATION_PLACEBOS
        .iter()
        .zip(&rates)
        .map(|(n, r)| format!("{n} {r:.3}"))
        .collect();
    outcome(
        density >= 0.95 && placebo_ok,
        format!(
            "density significant positive in {:.1}% (need ≥ 95%); placebo rejection {} (each in [0.01, 0.12])",
            density * 100.0,
            shown.join(", ")
        ),
    )
}

fn diffusion_classes() -> Outcome {
    let classify = |shape: ShapeConfig, want: Shape, base: u64| {
        (0..200u64)
            .into_par_iter()
            .filter(|seed| {
                let sim = gen_diffusion_series(&DiffusionSimConfig::new(base + seed, 1000, shape.clone())).unwrap();
                classify_curve(&adoption_series(&sim.openings).unwrap()).unwrap().class == want
            })
            .count()
    };
    let s = classify(ShapeConfig::default_s(), Shape::S, 30_000);
    let c = classify(ShapeConfig::default_c(), Shape::C, 40_000);
    let ShapeConfig::S { k, t0 } = ShapeConfig::default_s() else { unreachable!() };
    let worst: (f64, f64) = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let sim = gen_diffusion_series(&DiffusionSimConfig::new(50_000 + seed, 1000, ShapeConfig::default_s())).unwrap();
            let fit = fit_diffusion(&adoption_series(&sim.openings).unwrap(), Model::Logistic).unwrap();
            ((fit.params[0] / k - 1.0).abs(), (fit.params[1] / t0 - 1.0).abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    outcome(
        s >= 190 && c >= 190 && worst.0 <= 0.10 && worst.1 <= 0.10,
        format!(
            "S {s}/200, C {c}/200 (need ≥ 190); k = {k}, t0 = {t0} recovered within {:.1}% / {:.1}% in all 200 runs at n = 1000 (need ≤ 10%)",
            worst.0 * 100.0,
            worst.1 * 100.0
        ),
    )
}

fn jenks_oracle() -> Outcome {
    let mut rng = common::rng(7);
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 500 {
        let n = rng.random_range(1..=12);
        let k = rng.random_range(1..=4);
        // Coarse grid so ties are common.
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-12..12) as f64 / 3.0).collect();
        let Ok(r) = jenks_classify(&values, k) else { continue };
        let oracle = common::jenks_exhaustive(&values, k);
        worst = worst.max((r.objective - oracle).abs() / oracle.max(1.0));
        checked += 1;
    }
    outcome(worst <= 1e-9, format!("500 cases, max relative gap to exhaustive optimum {worst:.1e}"))
}

fn zscores() -> Outcome {
    let mut rng = common::rng(8);
    let (mut worst_mean, mut worst_sd) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let scale = 10f64.powi(rng.random_range(-3..4));
        let shift = rng.random_range(-1e3..1e3);
        let values = (0..rng.random_range(20..200))
            .map(|i| {
                let key = (format!("a{i:03}"), 2000 + rng.random_range(0..4), format!("d{}", rng.random_range(0..3)));
                (key, shift + scale * rng.random_range(-5.0..5.0))
            })
            .collect();
        let z = zscore_by_period(&ScoreTable::from_values(values, false)).unwrap();
        let mut slices: std::collections::BTreeMap<(i32, &str), Vec<f64>> = Default::default();
        for ((_, y, d), v) in z.values() {
            slices.entry((*y, d)).or_default().push(*v);
        }
        for vs in slices.values() {
            let n = vs.len() as f64;
            let m = vs.iter().sum::<f64>() / n;
            let sd = (vs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            worst_mean = worst_mean.max(m.abs());
            worst_sd = worst_sd.max((sd - 1.0).abs());
        }
    }
    outcome(
        worst_mean < 1e-10 && worst_sd <= 1e-10,
        format!("100 tables, max |mean| {worst_mean:.1e}, max |sd − 1| {worst_sd:.1e} (tol 1e-10)"),
    )
}

fn defense_detection() -> Outcome {
    let run = |gain: f64, base: u64| -> Vec<(usize, f64)> {
        (0..100u64)
            .into_par_iter()
            .map(|i| {
                let seed = base + i;
                let sim = gen_defense_events(&DefenseSimConfig {
                    seed,
                    gain,
                    ..Default::default()
                })
                .unwrap();
                let (series, _) = build_series(&sim.events, "area01", &sim.taxonomy, &DefenseConfig::default()).unwrap();
                let r = test_structural_response(&series, 4, 2000, seed).unwrap();
                (r.best_lag, r.p_value)
            })
            .collect()
    };
    let on = run(0.8, 60_000);
    let off = run(0.0, 70_000);
    let detected = on.iter().filter(|(l, p)| *l == 1 && *p < 0.05).count();
    let false_alarms = off.iter().filter(|(_, p)| *p < 0.05).count();
    outcome(
        detected >= 90 && false_alarms <= 10,
        format!("gain 0.8: lag 1 with p < 0.05 in {detected}/100 (need ≥ 90); gain 0: p < 0.05 in {false_alarms}/100 (need ≤ 10)"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    common::pipeline::run_all(dir.path(), None);
    let first = common::pipeline::snapshot(dir.path());
    common::pipeline::run_all(dir.path(), None);
    let second = common::pipeline::snapshot(dir.path());
    let differing: Vec<String> = first
        .iter()
        .filter(|(p, b)| second.get(*p) != Some(b))
        .map(|(p, _)| p.display().to_string())
        .collect();
    let subcommands = common::pipeline::steps(dir.path()).iter().map(|s| s.0).collect::<std::collections::BTreeSet<_>>().len();
    outcome(
        differing.is_empty() && first.len() == second.len(),
        format!(
            "{subcommands} subcommands, {} files compared byte for byte{}",
            first.len(),
            if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }
        ),
    )
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "specialization worked example", s(1), worked_example),
        criterion(2, "depth-weight anchors", s(1), depth_anchors),
        criterion(3, "within estimator vs LSDV and sandwich oracle", s(5), lsdv_equivalence),
        criterion(4, "development sign pattern and placebo calibration", s(120), development_signs),
        criterion(5, "differentiation pattern", s(120), differentiation_pattern),
        criterion(6, "diffusion classification and recovery", s(60), diffusion_classes),
        criterion(7, "Jenks vs exhaustive partitions", s(10), jenks_oracle),
        criterion(8, "z-score normalization", s(1), zscores),
        criterion(9, "defense detection and null calibration", s(180), defense_detection),
        criterion(10, "byte-identical reruns", s(60), determinism),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
