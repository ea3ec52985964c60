//! Drives the `scenekit` binary through every subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_scenekit");

pub fn scenekit(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("SCENEKIT_THREADS", t),
        None => cmd.env_remove("SCENEKIT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

/// Every subcommand invocation, in dependency order, rooted at `dir`.
/// Simulated inputs are generated by the first few steps.
pub fn steps(dir: &Path) -> Vec<(&'static str, Vec<String>)> {
    let p = |s: &str| dir.join(s).display().to_string();
    let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let census = p("census.csv");
    vec![
        ("simulate", v(&["simulate", "--model", "amenity", "--seed", "3", "--n", "12", "--out", &p("sim_amenity")])),
        ("simulate", v(&["simulate", "--model", "development", "--seed", "3", "--n", "200", "--out", &p("sim_dev")])),
        ("simulate", v(&["simulate", "--model", "specialization", "--seed", "3", "--n", "6", "--out", &p("sim_spec")])),
        ("simulate", v(&["simulate", "--model", "diffusion", "--shape", "c", "--seed", "3", "--n", "300", "--out", &p("sim_diff")])),
        ("simulate", v(&["simulate", "--model", "defense", "--seed", "3", "--n", "2", "--out", &p("sim_def")])),
        ("simulate", v(&["simulate", "--model", "differentiation", "--seed", "3", "--n", "100", "--out", &p("sim_dif")])),
        ("score", v(&["score", "--panel", &p("sim_amenity/amenities.csv"), "--weights", &p("sim_amenity/weights.csv"), "--out", &p("score")])),
        ("trend", v(&["trend", "--scores", &p("score/scores_z.csv"), "--group-by", "city", "--out", &p("trend")])),
        ("change", v(&["change", "--scores", &p("score/scores_raw.csv"), "--from", "2008", "--to", "2017", "--zscore", "--out", &p("change")])),
        ("jenks", v(&["jenks", "--changes", &p("change/change.csv"), "--dimension", "self_expression", "--k", "4", "--out", &p("jenks")])),
        ("specialize", v(&["specialize", "--events", &p("sim_spec/events.csv"), "--taxonomy", &p("sim_spec/taxonomy.csv"), "--group-by", "city", "--out", &p("specialize")])),
        ("fe", v(&["fe", "--panel", &p("sim_dev/panel.csv"), "--response", "self_expression,tradition", "--regressors", "pct_ba,median_income,placebo", "--cluster", "entity", "--out", &p("fe")])),
        ("fe", v(&["fe", "--scores", &p("score/scores_z.csv"), "--census", &census, "--response", "glamour", "--regressors", "pct_ba", "--period-effects", "--out", &p("fe_census")])),
        ("diffusion", v(&["diffusion", "--openings", &p("sim_diff/openings.csv"), "--covariates", &p("sim_diff/covariates.csv"), "--out", &p("diffusion")])),
        ("cohorts", v(&["cohorts", "--openings", &p("sim_diff/openings.csv"), "--covariates", &p("sim_diff/covariates.csv"), "--sizes", "100,100,100", "--out", &p("cohorts")])),
        ("defense", v(&["defense", "--events", &p("sim_def/events.csv"), "--taxonomy", &p("sim_def/taxonomy.csv"), "--permutations", "499", "--seed", "5", "--out", &p("defense")])),
        ("selftest", v(&["selftest", "--out", &p("selftest")])),
    ]
}

/// A census table for the simulated amenity areas: `pct_ba` per area-year.
pub fn write_census(dir: &Path) {
    let mut csv = String::from("area_id,year,variable,value\n");
    for city in ["toronto", "phoenix"] {
        for i in 0..12 {
            for year in 2008..=2017 {
                let v = 20.0 + (i * 7 % 11) as f64 + (year - 2008) as f64 * if city == "toronto" { 0.8 } else { 0.2 };
                csv.push_str(&format!("{city}:{i:03},{year},pct_ba,{v}\n"));
            }
        }
    }
    std::fs::write(dir.join("census.csv"), csv).unwrap();
}

/// Contents of every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Runs every step, panicking with stderr on a nonzero exit.
pub fn run_all(dir: &Path, threads: Option<&str>) {
    write_census(dir);
    for (name, args) in steps(dir) {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = scenekit(&args, threads);
        assert!(out.status.success(), "{name} failed: {}", String::from_utf8_lossy(&out.stderr));
    }
}
