//! Taxonomy-depth specialization index.
//!
//! A category's weight is its 1-based depth in the taxonomy: roots score 1,
//! their children 2, and so on. An area's index is the mean weight over the
//! distinct categories present, so an area offering only general categories
//! scores 1 and one offering refined sub-categories scores higher.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{CsvOut, ReviewEventLog, Taxonomy};
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum SpecializationError {
    #[error("empty category set")]
    EmptyCategorySet,
    #[error("category `{0}` has no depth weight")]
    UnknownCategory(String),
    #[error("area `{0}` is not mapped to a group")]
    UnmappedArea(String),
    #[error("event log is empty")]
    NoEvents,
}

/// 1-based taxonomy depth of every category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthWeightMap {
    weights: BTreeMap<String, u32>,
}

impl DepthWeightMap {
    pub fn get(&self, category: &str) -> Option<u32> {
        self.weights.get(category).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.weights.iter().map(|(c, w)| (c.as_str(), *w))
    }

    pub fn max_weight(&self) -> u32 {
        self.weights.values().copied().max().unwrap_or(0)
    }
}

pub fn depth_weights(taxonomy: &Taxonomy) -> DepthWeightMap {
    DepthWeightMap {
        weights: taxonomy
            .nodes()
            .map(|n| (n.to_string(), taxonomy.depth(n).expect("node has a depth")))
            .collect(),
    }
}

/// Index over the distinct category set: returns `(score, n_categories)`.
pub fn specialization_index<'a>(
    categories: impl IntoIterator<Item = &'a str>,
    weights: &DepthWeightMap,
) -> Result<(f64, usize), SpecializationError> {
    let distinct: BTreeSet<&str> = categories.into_iter().collect();
    specialization_index_multiset(distinct, weights)
}

/// Index counting every occurrence, for sensitivity checks against the
/// distinct-set definition.
pub fn specialization_index_multiset<'a>(
    categories: impl IntoIterator<Item = &'a str>,
    weights: &DepthWeightMap,
) -> Result<(f64, usize), SpecializationError> {
    let mut total = 0u64;
    let mut n = 0usize;
    for c in categories {
        let w = weights
            .get(c)
            .ok_or_else(|| SpecializationError::UnknownCategory(c.to_string()))?;
        total += u64::from(w);
        n += 1;
    }
    if n == 0 {
        return Err(SpecializationError::EmptyCategorySet);
    }
    Ok((total as f64 / n as f64, n))
}

/// How category presence is accumulated over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SeriesConfig {
    /// A category seen in year `y` counts in years `y..y + expiry`;
    /// `None` keeps it forever.
    pub expiry_years: Option<u32>,
    /// Count repeated categories instead of the distinct set.
    pub multiset: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecializationScore {
    pub area_id: String,
    pub year: i32,
    pub score: f64,
    pub n_categories: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupYear {
    pub group_id: String,
    pub year: i32,
    pub mean: f64,
    /// Sample sd over √n; `None` with fewer than two areas.
    pub se: Option<f64>,
    pub n_areas: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecializationSeries {
    pub areas: Vec<SpecializationScore>,
    pub groups: Vec<GroupYear>,
}

impl SpecializationSeries {
    pub fn groups_csv(&self) -> String {
        let mut out = CsvOut::new(&["group_id", "year", "mean", "se", "n_areas"]);
        for g in &self.groups {
            out.row([
                g.group_id.clone(),
                g.year.to_string(),
                g.mean.to_string(),
                g.se.map(|s| s.to_string()).unwrap_or_default(),
                g.n_areas.to_string(),
            ]);
        }
        out.finish()
    }

    pub fn areas_csv(&self) -> String {
        let mut out = CsvOut::new(&["area_id", "year", "score", "n_categories"]);
        for a in &self.areas {
            out.row([
                a.area_id.clone(),
                a.year.to_string(),
                a.score.to_string(),
                a.n_categories.to_string(),
            ]);
        }
        out.finish()
    }
}

/// Per-area annual indices and their group means.
///
/// Each area is scored from its first event year through the last year in
/// the log; area-years whose presence window is empty are skipped.
pub fn specialization_series(
    events: &ReviewEventLog,
    taxonomy: &Taxonomy,
    grouping: &BTreeMap<String, String>,
    config: SeriesConfig,
) -> Result<SpecializationSeries, SpecializationError> {
    let last_year = events
        .events()
        .iter()
        .map(|e| e.timestamp.year())
        .max()
        .ok_or(SpecializationError::NoEvents)?;
    let weights = depth_weights(taxonomy);

    // area -> year -> category -> occurrences
    let mut seen: BTreeMap<&str, BTreeMap<i32, BTreeMap<&str, u64>>> = BTreeMap::new();
    for e in events.events() {
        if !grouping.contains_key(&e.area_id) {
            return Err(SpecializationError::UnmappedArea(e.area_id.clone()));
        }
        let per_year = seen.entry(&e.area_id).or_default().entry(e.timestamp.year()).or_default();
        for c in &e.categories {
            *per_year.entry(c).or_default() += 1;
        }
    }

    let per_area: Vec<Result<Vec<SpecializationScore>, SpecializationError>> = seen
        .par_iter()
        .map(|(area, by_year)| {
            let first = *by_year.keys().next().unwrap();
            let mut out = Vec::new();
            for year in first..=last_year {
                let lo = match config.expiry_years {
                    Some(x) => year - x as i32 + 1,
                    None => i32::MIN,
                };
                let mut present: BTreeMap<&str, u64> = BTreeMap::new();
                for (_, cats) in by_year.range(lo..=year) {
                    for (c, n) in cats {
                        *present.entry(c).or_default() += n;
                    }
                }
                if present.is_empty() {
                    continue;
                }
                let (score, n) = if config.multiset {
                    let items = present
                        .iter()
                        .flat_map(|(c, n)| std::iter::repeat_n(*c, *n as usize));
                    specialization_index_multiset(items, &weights)?
                } else {
                    specialization_index(present.keys().copied(), &weights)?
                };
                out.push(SpecializationScore {
                    area_id: area.to_string(),
                    year,
                    score,
                    n_categories: n,
                });
            }
            Ok(out)
        })
        .collect();
    let mut areas = Vec::new();
    for r in per_area {
        areas.extend(r?);
    }

    let mut acc: BTreeMap<(&str, i32), Vec<f64>> = BTreeMap::new();
    for a in &areas {
        acc.entry((grouping[&a.area_id].as_str(), a.year)).or_default().push(a.score);
    }
    let groups = acc
        .into_iter()
        .map(|((g, year), scores)| GroupYear {
            group_id: g.to_string(),
            year,
            mean: stats::mean(&scores).unwrap(),
            se: stats::sample_sd(&scores).map(|sd| sd / (scores.len() as f64).sqrt()),
            n_areas: scores.len(),
        })
        .collect();
    Ok(SpecializationSeries { areas, groups })
}
