mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use scenekit::data::{AmenityObservation, AmenityPanel, DimensionWeightTable};
use scenekit::scenescore::{
    jenks_classify, jenks_objective, performance_scores, score_change, zscore_by_period, ScoreTable,
};

const CODES: [&str; 4] = ["ART_GALLERY", "CHURCH", "DINER", "NIGHTCLUB"];

fn panel(cells: &BTreeMap<(u8, i32, u8), u64>, scale: Option<((u8, i32), u64)>) -> AmenityPanel {
    AmenityPanel::from_observations(cells.iter().map(|((a, y, c), n)| {
        let m = match scale {
            Some(((sa, sy), m)) if sa == *a && sy == *y => m,
            _ => 1,
        };
        AmenityObservation {
            area_id: format!("a{a}"),
            year: *y,
            amenity_code: CODES[*c as usize].into(),
            count: n * m,
        }
    }))
    .unwrap()
}

fn score_table() -> impl Strategy<Value = ScoreTable> {
    prop::collection::btree_map((0..12u8, 2000..2003i32, 0..2u8), -100.0..100.0f64, 8..60).prop_map(|cells| {
        ScoreTable::from_values(
            cells
                .into_iter()
                .map(|((a, y, d), v)| ((format!("a{a:02}"), y, format!("d{d}")), v))
                .collect(),
            false,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_ignore_count_scale(cells in prop::collection::btree_map((0..4u8, 2000..2003i32, 0..4u8), 1..50u64, 4..40), m in 2..9u64, pick in any::<prop::sample::Index>()) {
        let keys: Vec<(u8, i32)> = cells.keys().map(|(a, y, _)| (*a, *y)).collect();
        let target = keys[pick.index(keys.len())];
        let weights = DimensionWeightTable::illustrative();
        let a = performance_scores(&panel(&cells, None), &weights).unwrap();
        let b = performance_scores(&panel(&cells, Some((target, m))), &weights).unwrap();
        prop_assert_eq!(a.values().len(), b.values().len());
        for (k, v) in a.values() {
            prop_assert!((v - b.values()[k]).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn zscores_survive_affine_maps(table in score_table(), a in 0.01..50.0f64, b in -100.0..100.0f64, slice in 0..6usize) {
        let (year, dim) = (2000 + (slice / 2) as i32, format!("d{}", slice % 2));
        let moved = ScoreTable::from_values(
            table.values().iter().map(|(k, v)| {
                let v = if k.1 == year && k.2 == dim { a * v + b } else { *v };
                (k.clone(), v)
            }).collect(),
            false,
        );
        let (z1, z2) = (zscore_by_period(&table).unwrap(), zscore_by_period(&moved).unwrap());
        prop_assert_eq!(z1.values().len(), z2.values().len());
        for (k, v) in z1.values() {
            prop_assert!((v - z2.values()[k]).abs() <= 1e-10, "{:?}: {} vs {}", k, v, z2.values()[k]);
        }
    }

    #[test]
    fn zscores_are_standardized(table in score_table()) {
        let z = zscore_by_period(&table).unwrap();
        let mut slices: BTreeMap<(i32, &str), Vec<f64>> = BTreeMap::new();
        for ((_, y, d), v) in z.values() {
            slices.entry((*y, d)).or_default().push(*v);
        }
        for vs in slices.values() {
            let n = vs.len() as f64;
            let mean = vs.iter().sum::<f64>() / n;
            let sd = (vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn change_is_antisymmetric(table in score_table()) {
        let years = table.years();
        prop_assume!(years.contains(&2000) && years.contains(&2002));
        let fwd = score_change(&table, 2000, 2002).unwrap();
        let back = score_change(&table, 2002, 2000).unwrap();
        prop_assert_eq!(fwd.values.len(), back.values.len());
        for (k, v) in &fwd.values {
            prop_assert_eq!(*v, -back.values[k]);
        }
    }

    #[test]
    fn jenks_matches_exhaustive_search(values in prop::collection::vec((-20i32..20).prop_map(|x| x as f64 / 4.0), 1..=12), k in 1..=4usize) {
        let distinct = {
            let mut v = values.clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        match jenks_classify(&values, k) {
            Ok(r) => {
                let oracle = common::jenks_exhaustive(&values, k);
                prop_assert!((r.objective - oracle).abs() <= 1e-9, "{} vs {}", r.objective, oracle);
                prop_assert!((jenks_objective(&values, &r.classes) - r.objective).abs() <= 1e-9);
                prop_assert_eq!(r.breaks.len(), k + 1);
            }
            Err(_) => prop_assert!(distinct < k),
        }
    }
}
