use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use scenekit::data::{ReviewEvent, ReviewEventLog};
use scenekit::simulate::balanced_taxonomy;
use scenekit::specialization::{depth_weights, specialization_index, specialization_series, SeriesConfig};

fn nodes_by_depth() -> BTreeMap<u32, Vec<String>> {
    let tax = balanced_taxonomy();
    let mut out: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for n in tax.nodes() {
        out.entry(tax.depth(n).unwrap()).or_default().push(n.to_string());
    }
    out
}

fn category() -> impl Strategy<Value = String> {
    let all: Vec<String> = balanced_taxonomy().nodes().map(String::from).collect();
    prop::sample::select(all)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn index_is_bounded_by_depths(cats in prop::collection::vec(category(), 1..30)) {
        let tax = balanced_taxonomy();
        let w = depth_weights(&tax);
        let (s, _) = specialization_index(cats.iter().map(String::as_str), &w).unwrap();
        prop_assert!((1.0..=tax.max_depth() as f64).contains(&s));
    }

    #[test]
    fn repeated_categories_change_nothing(cats in prop::collection::vec(category(), 1..20), reps in prop::collection::vec(any::<prop::sample::Index>(), 1..10)) {
        let w = depth_weights(&balanced_taxonomy());
        let mut more = cats.clone();
        more.extend(reps.iter().map(|i| cats[i.index(cats.len())].clone()));
        let a = specialization_index(cats.iter().map(String::as_str), &w).unwrap();
        let b = specialization_index(more.iter().map(String::as_str), &w).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn deeper_raises_and_shallower_lowers(cats in prop::collection::vec(category(), 1..20), pick in any::<prop::sample::Index>(), depth in 1..=4u32) {
        let w = depth_weights(&balanced_taxonomy());
        let (before, _) = specialization_index(cats.iter().map(String::as_str), &w).unwrap();
        let fresh: Vec<String> = nodes_by_depth()[&depth].iter().filter(|c| !cats.contains(c)).cloned().collect();
        prop_assume!(!fresh.is_empty());
        let mut more = cats.clone();
        more.push(fresh[pick.index(fresh.len())].clone());
        let (after, _) = specialization_index(more.iter().map(String::as_str), &w).unwrap();
        let d = depth as f64;
        if d > before {
            prop_assert!(after > before);
        } else if d < before {
            prop_assert!(after < before);
        } else {
            prop_assert_eq!(after, before);
        }
    }
}

#[test]
fn group_means_match_direct_recomputation() {
    let by_depth = nodes_by_depth();
    let tax = balanced_taxonomy();
    let mut events = Vec::new();
    let mut grouping = BTreeMap::new();
    // area i in year y lists categories whose depths cycle with i and y.
    for i in 0..8 {
        let area = format!("area{i}");
        grouping.insert(area.clone(), if i % 2 == 0 { "even" } else { "odd" }.to_string());
        for y in 2014..2017 {
            for j in 0..=(i % 3) {
                let depth = 1 + ((i + j + (y - 2014) as usize) % 4) as u32;
                let pool = &by_depth[&depth];
                events.push(ReviewEvent {
                    timestamp: Utc.with_ymd_and_hms(y, 1 + j as u32, 1, 0, 0, 0).unwrap(),
                    user_id: "u".into(),
                    venue_id: format!("{area}-{y}-{j}"),
                    area_id: area.clone(),
                    categories: [pool[(i * 7 + j) % pool.len()].clone()].into(),
                });
            }
        }
    }
    let log = ReviewEventLog::new(events.clone(), &tax).unwrap();
    let series = specialization_series(&log, &tax, &grouping, SeriesConfig::default()).unwrap();

    // Cumulative distinct categories per area up to each year, scored by hand.
    let depth = |c: &str| tax.depth(c).unwrap() as f64;
    let mut expected: BTreeMap<(String, i32), Vec<f64>> = BTreeMap::new();
    for (area, group) in &grouping {
        for y in 2014..2017 {
            let mut cats: Vec<&str> = events
                .iter()
                .filter(|e| &e.area_id == area && e.timestamp.format("%Y").to_string().parse::<i32>().unwrap() <= y)
                .flat_map(|e| e.categories.iter().map(String::as_str))
                .collect();
            cats.sort();
            cats.dedup();
            let score = cats.iter().map(|c| depth(c)).sum::<f64>() / cats.len() as f64;
            expected.entry((group.clone(), y)).or_default().push(score);
        }
    }
    assert_eq!(series.groups.len(), expected.len());
    for g in &series.groups {
        let scores = &expected[&(g.group_id.clone(), g.year)];
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        assert!((g.mean - mean).abs() < 1e-12, "{} {}: {} vs {}", g.group_id, g.year, g.mean, mean);
        assert_eq!(g.n_areas, scores.len());
    }
}
