mod common;

use common::pipeline::{run_all, scenekit, snapshot, steps};
use sha2::{Digest, Sha256};

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    run_all(dir.path(), None);
    let first = snapshot(dir.path());
    run_all(dir.path(), None);
    assert_eq!(first, snapshot(dir.path()));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(a.path(), Some("1"));
    run_all(b.path(), Some("4"));
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (path, bytes) in &sa {
        // Manifests echo their own (different) temp paths.
        if path.file_name().unwrap() != "manifest.json" {
            assert!(bytes == &sb[path], "{} differs", path.display());
        }
    }
}

#[test]
fn every_subcommand_writes_a_manifest_with_input_hashes() {
    let dir = tempfile::tempdir().unwrap();
    run_all(dir.path(), None);
    let mut seen = std::collections::BTreeSet::new();
    for (name, args) in steps(dir.path()) {
        let out = args[args.iter().position(|a| a == "--out").unwrap() + 1].clone();
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(std::path::Path::new(&out).join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["subcommand"], name);
        assert_eq!(manifest["argv"], serde_json::json!(args));
        for (path, hash) in manifest["inputs"].as_object().unwrap() {
            let digest = hex::encode(Sha256::digest(std::fs::read(path).unwrap()));
            assert_eq!(hash.as_str().unwrap(), digest, "{path}");
        }
        for (file, hash) in manifest["outputs"].as_object().unwrap() {
            let digest = hex::encode(Sha256::digest(std::fs::read(std::path::Path::new(&out).join(file)).unwrap()));
            assert_eq!(hash.as_str().unwrap(), digest, "{file}");
        }
        seen.insert(name);
    }
    assert_eq!(seen.len(), 11);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(scenekit(&["--help"], None).status.code(), Some(0));
    assert_eq!(scenekit(&["--version"], None).status.code(), Some(0));

    let usage = scenekit(&["score"], None);
    assert_eq!(usage.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Usage:"));
    assert_eq!(scenekit(&["fe", "--response", "y", "--regressors", "x", "--out", out], None).status.code(), Some(1));
    assert_eq!(scenekit(&["selftest"], Some("0")).status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "area_id,year,amenity_code,count\na,2000,X,-3\n").unwrap();
    let data = scenekit(&["score", "--panel", bad.to_str().unwrap(), "--out", out], None);
    assert_eq!(data.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&data.stderr).contains("line 2"));

    let ok = scenekit(&["selftest"], None);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}

#[test]
fn scores_and_census_feed_fixed_effects() {
    let dir = tempfile::tempdir().unwrap();
    run_all(dir.path(), None);
    let table = std::fs::read_to_string(dir.path().join("fe_census/fe_table.txt")).unwrap();
    assert!(table.contains("pct_ba"));
    assert!(table.contains("entity and period fixed effects"));
    let csv = std::fs::read_to_string(dir.path().join("fe_census/fe_glamour.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("period_2009,")));
}
