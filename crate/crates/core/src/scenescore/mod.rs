//! Scene performance scores, per-year z-scores, change scores and Jenks
//! classes.
//!
//! A performance score is the count-weighted mean of amenity dimension
//! weights in an area-year. The formula sits behind the [`Scorer`] trait so
//! an alternative can be dropped in without touching the rest of the
//! pipeline.

mod jenks;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use thiserror::Error;

use crate::data::{parse_field, parse_real, require_nonempty, CsvOut, DataError, Table};
use crate::data::{AmenityPanel, DimensionWeightTable};

pub use jenks::{jenks_classify, jenks_objective, JenksResult};

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("no amenity code in the panel has a weight")]
    NoOverlap,
    #[error("score table is already normalized")]
    AlreadyNormalized,
    #[error("year {0} not present in score table")]
    YearMissing(i32),
    #[error("{distinct} distinct values cannot form {k} classes")]
    TooFewDistinctValues { distinct: usize, k: usize },
    #[error("class count must be at least 1")]
    ZeroClasses,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("area `{0}` has no group")]
    UnmappedArea(String),
}

/// Scores keyed by (area, year, dimension).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    values: BTreeMap<(String, i32, String), f64>,
    normalized: bool,
    dropped: usize,
}

impl ScoreTable {
    pub fn from_values(values: BTreeMap<(String, i32, String), f64>, normalized: bool) -> Self {
        ScoreTable {
            values,
            normalized,
            dropped: 0,
        }
    }

    pub fn values(&self) -> &BTreeMap<(String, i32, String), f64> {
        &self.values
    }

    pub fn get(&self, area: &str, year: i32, dimension: &str) -> Option<f64> {
        self.values
            .get(&(area.to_string(), year, dimension.to_string()))
            .copied()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Entries dropped by z-scoring because their (year, dimension) slice
    /// had zero variance.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.values.keys().map(|(_, y, _)| *y).collect()
    }

    pub fn dimensions(&self) -> BTreeSet<&str> {
        self.values.keys().map(|(_, _, d)| d.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reads the CSV written by [`ScoreTable::to_csv`] as a raw table.
    pub fn from_reader<R: Read>(source: R) -> Result<Self, DataError> {
        let rows = Table::new(source, &["area_id", "year", "dimension", "score"])?.rows()?;
        let mut values = BTreeMap::new();
        for row in rows {
            let line = row.line;
            let [a, y, d, v] = <[String; 4]>::try_from(row.fields).unwrap();
            require_nonempty(&a, "area_id", line)?;
            require_nonempty(&d, "dimension", line)?;
            let y: i32 = parse_field(&y, "year", line)?;
            let v = parse_real(&v, "score", line)?;
            if values.insert((a.clone(), y, d.clone()), v).is_some() {
                return Err(DataError::DuplicateKey {
                    key: format!("({a}, {y}, {d})"),
                    line,
                });
            }
        }
        Ok(ScoreTable::from_values(values, false))
    }

    /// CSV `area_id,year,dimension,score`.
    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["area_id", "year", "dimension", "score"]);
        for ((a, y, d), v) in &self.values {
            out.row([a.clone(), y.to_string(), d.clone(), v.to_string()]);
        }
        out.finish()
    }
}

/// Per-area score differences between two years.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeTable {
    pub values: BTreeMap<(String, String), f64>,
    pub from_year: i32,
    pub to_year: i32,
}

impl ChangeTable {
    /// CSV `area_id,dimension,from_year,to_year,change`.
    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["area_id", "dimension", "from_year", "to_year", "change"]);
        let (from, to) = (self.from_year.to_string(), self.to_year.to_string());
        for ((a, d), v) in &self.values {
            out.row([a.clone(), d.clone(), from.clone(), to.clone(), v.to_string()]);
        }
        out.finish()
    }

    /// Reads the CSV written by [`ChangeTable::to_csv`]. All rows must share
    /// one pair of years; an empty file yields years 0.
    pub fn from_reader<R: Read>(source: R) -> Result<Self, DataError> {
        let rows = Table::new(source, &["area_id", "dimension", "from_year", "to_year", "change"])?.rows()?;
        let mut values = BTreeMap::new();
        let mut years = None;
        for row in rows {
            let line = row.line;
            let [a, d, from, to, v] = <[String; 5]>::try_from(row.fields).unwrap();
            require_nonempty(&a, "area_id", line)?;
            require_nonempty(&d, "dimension", line)?;
            let pair: (i32, i32) = (parse_field(&from, "from_year", line)?, parse_field(&to, "to_year", line)?);
            if *years.get_or_insert(pair) != pair {
                return Err(DataError::UnparseableRow {
                    line,
                    reason: "rows disagree on from_year/to_year".into(),
                });
            }
            let v = parse_real(&v, "change", line)?;
            if values.insert((a.clone(), d.clone()), v).is_some() {
                return Err(DataError::DuplicateKey {
                    key: format!("({a}, {d})"),
                    line,
                });
            }
        }
        let (from_year, to_year) = years.unwrap_or((0, 0));
        Ok(ChangeTable {
            values,
            from_year,
            to_year,
        })
    }

    /// Changes for one dimension, ordered by area.
    pub fn dimension(&self, dimension: &str) -> Vec<(&str, f64)> {
        self.values
            .iter()
            .filter(|((_, d), _)| d == dimension)
            .map(|((a, _), v)| (a.as_str(), *v))
            .collect()
    }
}

/// Turns one area-year's amenity counts into a dimension score.
pub trait Scorer {
    /// `None` when the score is undefined for this area-year.
    fn score(&self, counts: &[(&str, u64)], weights: &DimensionWeightTable, dimension: &str) -> Option<f64>;
}

/// Count-weighted mean of the weights of the weighted amenity codes.
#[derive(Debug, Clone, Copy, Default)]
pub struct WeightedMean;

impl Scorer for WeightedMean {
    fn score(&self, counts: &[(&str, u64)], weights: &DimensionWeightTable, dimension: &str) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0u64);
        for &(code, n) in counts {
            if let Some(w) = weights.weight(code, dimension) {
                num += n as f64 * w;
                den += n;
            }
        }
        (den > 0).then(|| num / den as f64)
    }
}

/// Raw performance scores with the default [`WeightedMean`] scorer.
pub fn performance_scores(
    panel: &AmenityPanel,
    weights: &DimensionWeightTable,
) -> Result<ScoreTable, ScoreError> {
    performance_scores_with(panel, weights, &WeightedMean)
}

pub fn performance_scores_with(
    panel: &AmenityPanel,
    weights: &DimensionWeightTable,
    scorer: &dyn Scorer,
) -> Result<ScoreTable, ScoreError> {
    let weighted = weights.amenity_codes();
    if !panel.amenity_codes().iter().any(|c| weighted.contains(c)) {
        return Err(ScoreError::NoOverlap);
    }
    let mut values = BTreeMap::new();
    for ((area, year), counts) in panel.by_area_year() {
        for dim in weights.dimensions() {
            if let Some(s) = scorer.score(&counts, weights, dim) {
                values.insert((area.to_string(), year, dim.clone()), s);
            }
        }
    }
    Ok(ScoreTable::from_values(values, false))
}

/// Standardizes every (year, dimension) slice to mean 0 and population sd 1.
/// Slices with zero spread are dropped and counted in [`ScoreTable::dropped`].
pub fn zscore_by_period(raw: &ScoreTable) -> Result<ScoreTable, ScoreError> {
    if raw.normalized {
        return Err(ScoreError::AlreadyNormalized);
    }
    let mut slices: BTreeMap<(i32, &str), Vec<(&str, f64)>> = BTreeMap::new();
    for ((a, y, d), v) in &raw.values {
        slices.entry((*y, d.as_str())).or_default().push((a.as_str(), *v));
    }
    let mut values = BTreeMap::new();
    let mut dropped = 0;
    for ((year, dim), entries) in slices {
        let n = entries.len() as f64;
        // The mean is kept as `rough + fix` and never rounded to one float:
        // that rounding dominates when the spread is tiny next to the level.
        let rough = entries.iter().map(|(_, v)| v).sum::<f64>() / n;
        let fix = entries.iter().map(|(_, v)| v - rough).sum::<f64>() / n;
        let mean = rough + fix;
        let var = entries.iter().map(|(_, v)| ((v - rough) - fix).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            dropped += entries.len();
            continue;
        }
        for (a, v) in entries {
            values.insert((a.to_string(), year, dim.to_string()), ((v - rough) - fix) / sd);
        }
    }
    Ok(ScoreTable {
        values,
        normalized: true,
        dropped,
    })
}

/// `score(to_year) − score(from_year)` for every area scored in both years.
pub fn score_change(scores: &ScoreTable, from_year: i32, to_year: i32) -> Result<ChangeTable, ScoreError> {
    let years = scores.years();
    for y in [from_year, to_year] {
        if !years.contains(&y) {
            return Err(ScoreError::YearMissing(y));
        }
    }
    let mut values = BTreeMap::new();
    for ((a, y, d), to) in &scores.values {
        if *y != to_year {
            continue;
        }
        if let Some(from) = scores.values.get(&(a.clone(), from_year, d.clone())) {
            values.insert((a.clone(), d.clone()), to - from);
        }
    }
    Ok(ChangeTable {
        values,
        from_year,
        to_year,
    })
}

/// Unweighted mean score per (group, year, dimension), with the number of
/// member areas averaged.
pub fn group_means(
    scores: &ScoreTable,
    grouping: impl Fn(&str) -> Option<String>,
) -> Result<BTreeMap<(String, i32, String), (f64, usize)>, ScoreError> {
    let mut acc: BTreeMap<(String, i32, String), Vec<f64>> = BTreeMap::new();
    for ((a, y, d), v) in &scores.values {
        let g = grouping(a).ok_or_else(|| ScoreError::UnmappedArea(a.clone()))?;
        acc.entry((g, *y, d.clone())).or_default().push(*v);
    }
    Ok(acc
        .into_iter()
        .map(|(k, vs)| (k, (vs.iter().sum::<f64>() / vs.len() as f64, vs.len())))
        .collect())
}
