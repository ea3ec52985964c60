//! Entity fixed-effects regression with cluster-robust standard errors.
//!
//! The pipeline is `standardize` (optional) → `within_transform` → OLS on the
//! demeaned data via QR, with a CR1 sandwich clustered by entity and
//! t(G − 1) reference distribution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::data::{CsvOut, WidePanel};
use crate::stats::t_two_sided_p;

/// Relative tolerance on the diagonal of R when deciding column rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum FeError {
    #[error("variable `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("no entity is observed in two or more periods")]
    NoMultiPeriodEntities,
    #[error("regressors are collinear: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("{0} cluster(s); at least 2 required")]
    TooFewClusters(usize),
    #[error("not enough observations: N={n}, K={k}, G={g}")]
    InsufficientDegreesOfFreedom { n: usize, k: usize, g: usize },
    #[error("duplicate observation ({entity}, {period})")]
    DuplicateObservation { entity: String, period: i32 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("row ({entity}, {period}) has {got} regressors, expected {expected}")]
    LengthMismatch {
        entity: String,
        period: i32,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in row ({entity}, {period})")]
    NonFinite { entity: String, period: i32 },
    #[error("every regressor was dropped")]
    NoRegressors,
    #[error("panel has no complete rows")]
    EmptyPanel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub entity_id: String,
    pub period: i32,
    pub response: f64,
    pub regressors: Vec<f64>,
}

/// Complete-case panel: one response and a fixed list of regressors.
/// Rows are kept sorted by (entity, period).
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    response_name: String,
    regressor_names: Vec<String>,
    rows: Vec<PanelRow>,
    dropped_incomplete: usize,
}

impl PanelDataset {
    pub fn new(
        response_name: impl Into<String>,
        regressor_names: Vec<String>,
        mut rows: Vec<PanelRow>,
    ) -> Result<Self, FeError> {
        for r in &rows {
            if r.regressors.len() != regressor_names.len() {
                return Err(FeError::LengthMismatch {
                    entity: r.entity_id.clone(),
                    period: r.period,
                    got: r.regressors.len(),
                    expected: regressor_names.len(),
                });
            }
            if !r.response.is_finite() || r.regressors.iter().any(|x| !x.is_finite()) {
                return Err(FeError::NonFinite {
                    entity: r.entity_id.clone(),
                    period: r.period,
                });
            }
        }
        rows.sort_by(|a, b| (&a.entity_id, a.period).cmp(&(&b.entity_id, b.period)));
        for w in rows.windows(2) {
            if w[0].entity_id == w[1].entity_id && w[0].period == w[1].period {
                return Err(FeError::DuplicateObservation {
                    entity: w[0].entity_id.clone(),
                    period: w[0].period,
                });
            }
        }
        Ok(PanelDataset {
            response_name: response_name.into(),
            regressor_names,
            rows,
            dropped_incomplete: 0,
        })
    }

    /// Assembles a dataset from named columns of a wide panel, dropping rows
    /// with any missing cell among the selected columns.
    pub fn from_wide(wide: &WidePanel, response: &str, regressors: &[&str]) -> Result<Self, FeError> {
        let col = |name: &str| wide.column(name).ok_or_else(|| FeError::UnknownVariable(name.to_string()));
        let y = col(response)?;
        let xs = regressors.iter().map(|r| col(r)).collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        let mut dropped = 0;
        for r in wide.rows() {
            let response = r.values[y];
            let regs: Option<Vec<f64>> = xs.iter().map(|&i| r.values[i]).collect();
            match (response, regs) {
                (Some(response), Some(regressors)) => rows.push(PanelRow {
                    entity_id: r.entity_id.clone(),
                    period: r.period,
                    response,
                    regressors,
                }),
                _ => dropped += 1,
            }
        }
        if rows.is_empty() {
            return Err(FeError::EmptyPanel);
        }
        let mut ds = Self::new(response, regressors.iter().map(|s| s.to_string()).collect(), rows)?;
        ds.dropped_incomplete = dropped;
        Ok(ds)
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn regressor_names(&self) -> &[String] {
        &self.regressor_names
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    /// Rows dropped during assembly for missing values.
    pub fn dropped_incomplete(&self) -> usize {
        self.dropped_incomplete
    }

    pub fn n_entities(&self) -> usize {
        self.rows.iter().map(|r| r.entity_id.as_str()).collect::<BTreeSet<_>>().len()
    }

    fn column(&self, j: Option<usize>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match j {
                None => r.response,
                Some(j) => r.regressors[j],
            })
            .collect()
    }

    fn map_columns(&self, mut f: impl FnMut(Option<usize>, &[f64]) -> Vec<f64>) -> Vec<PanelRow> {
        let y = f(None, &self.column(None));
        let xs: Vec<Vec<f64>> = (0..self.regressor_names.len())
            .map(|j| f(Some(j), &self.column(Some(j))))
            .collect();
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| PanelRow {
                entity_id: r.entity_id.clone(),
                period: r.period,
                response: y[i],
                regressors: xs.iter().map(|c| c[i]).collect(),
            })
            .collect()
    }

    /// Entity row ranges (rows are sorted by entity).
    fn entity_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.rows.len() {
            if i == self.rows.len() || self.rows[i].entity_id != self.rows[start].entity_id {
                out.push(start..i);
                start = i;
            }
        }
        out
    }
}

/// Pooled mean and population sd used to standardize one variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub variable: String,
    pub mean: f64,
    pub sd: f64,
}

/// Rescales the response and every regressor to pooled mean 0, sd 1.
pub fn standardize(data: &PanelDataset) -> Result<(PanelDataset, Vec<Standardization>), FeError> {
    let mut params = Vec::new();
    let mut failed = None;
    let rows = data.map_columns(|j, col| {
        let name = match j {
            None => data.response_name.clone(),
            Some(j) => data.regressor_names[j].clone(),
        };
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(sd > 1e-300) || sd <= 1e-14 * mean.abs() {
            failed.get_or_insert(name.clone());
        }
        params.push(Standardization { variable: name, mean, sd });
        col.iter().map(|x| (x - mean) / sd).collect()
    });
    if let Some(name) = failed {
        return Err(FeError::ZeroVariance(name));
    }
    Ok((
        PanelDataset {
            rows,
            ..data.clone()
        },
        params,
    ))
}

/// Output of [`within_transform`].
#[derive(Debug, Clone, PartialEq)]
pub struct Demeaned {
    pub data: PanelDataset,
    /// Entities observed in a single period, removed before demeaning.
    pub dropped_entities: Vec<String>,
    /// Regressors that are constant within every entity (all-zero after
    /// demeaning).
    pub constant_regressors: Vec<String>,
}

/// Subtracts each entity's mean from every variable.
pub fn within_transform(data: &PanelDataset) -> Result<Demeaned, FeError> {
    let mut dropped_entities = Vec::new();
    let mut keep = Vec::new();
    for range in data.entity_ranges() {
        if range.len() >= 2 {
            keep.extend(data.rows[range].iter().cloned());
        } else {
            dropped_entities.push(data.rows[range.start].entity_id.clone());
        }
    }
    if keep.is_empty() {
        return Err(FeError::NoMultiPeriodEntities);
    }
    let kept = PanelDataset {
        rows: keep,
        ..data.clone()
    };
    let ranges = kept.entity_ranges();
    let mut constant = Vec::new();
    let rows = kept.map_columns(|j, col| {
        let mut out = col.to_vec();
        for r in &ranges {
            // Two passes: the second removes the rounding left by the first.
            for _ in 0..2 {
                let m = out[r.clone()].iter().sum::<f64>() / r.len() as f64;
                out[r.clone()].iter_mut().for_each(|x| *x -= m);
            }
        }
        if let Some(j) = j {
            let scale = col.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            if out.iter().all(|x| x.abs() <= 1e-10 * scale) {
                constant.push(kept.regressor_names[j].clone());
            }
        }
        out
    });
    Ok(Demeaned {
        data: PanelDataset { rows, ..kept },
        dropped_entities,
        constant_regressors: constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeOptions {
    /// Add one indicator per period (except the first) before demeaning.
    pub period_effects: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub stars: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeResult {
    pub response: String,
    pub coefficients: Vec<Coefficient>,
    pub n_observations: usize,
    pub n_entities: usize,
    pub n_clusters: usize,
    pub dropped_regressors: Vec<String>,
    pub dropped_entities: usize,
    pub dropped_incomplete: usize,
    pub period_effects: bool,
}

/// Significance stars: `*` p < 0.05, `**` p < 0.01, `***` p < 0.001.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Within estimator with entity-clustered CR1 standard errors.
pub fn fit_fe(data: &PanelDataset, options: FeOptions) -> Result<FeResult, FeError> {
    let augmented;
    let data = if options.period_effects {
        augmented = with_period_indicators(data);
        &augmented
    } else {
        data
    };
    let dm = within_transform(data)?;
    let d = &dm.data;
    let retained: Vec<usize> = (0..d.regressor_names.len())
        .filter(|&j| !dm.constant_regressors.contains(&d.regressor_names[j]))
        .collect();
    if retained.is_empty() {
        return Err(FeError::NoRegressors);
    }
    let ranges = d.entity_ranges();
    let (n, k, g) = (d.rows.len(), retained.len(), ranges.len());
    if g < 2 {
        return Err(FeError::TooFewClusters(g));
    }
    if n + 1 <= k + g {
        return Err(FeError::InsufficientDegreesOfFreedom { n, k, g });
    }

    let x = DMatrix::from_fn(n, k, |i, j| d.rows[i].regressors[retained[j]]);
    let y = DVector::from_iterator(n, d.rows.iter().map(|r| r.response));
    let qr = x.clone().qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..k)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL * x.column(j).norm())
        .map(|j| d.regressor_names[retained[j]].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(FeError::RankDeficient(dependent));
    }
    let qty = qr.q().transpose() * &y;
    let beta = r.solve_upper_triangular(&qty).expect("full rank");
    let resid = &y - &x * &beta;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("full rank");
    let bread = &r_inv * r_inv.transpose();
    let mut meat = DMatrix::zeros(k, k);
    for range in &ranges {
        let mut s = DVector::zeros(k);
        for i in range.clone() {
            s += x.row(i).transpose() * resid[i];
        }
        meat += &s * s.transpose();
    }
    let (nf, kf, gf) = (n as f64, k as f64, g as f64);
    let c = gf / (gf - 1.0) * (nf - 1.0) / (nf - kf - gf + 1.0);
    let v = (&bread * meat * &bread) * c;

    let coefficients = retained
        .iter()
        .enumerate()
        .map(|(j, &col)| {
            let se = v[(j, j)].max(0.0).sqrt();
            let t = beta[j] / se;
            let p = t_two_sided_p(t, gf - 1.0);
            Coefficient {
                name: d.regressor_names[col].clone(),
                estimate: beta[j],
                se,
                t,
                p,
                stars: stars(p),
            }
        })
        .collect();
    Ok(FeResult {
        response: d.response_name.clone(),
        coefficients,
        n_observations: n,
        n_entities: g,
        n_clusters: g,
        dropped_regressors: dm.constant_regressors,
        dropped_entities: dm.dropped_entities.len(),
        dropped_incomplete: data.dropped_incomplete,
        period_effects: options.period_effects,
    })
}

fn with_period_indicators(data: &PanelDataset) -> PanelDataset {
    let periods: Vec<i32> = data
        .rows
        .iter()
        .map(|r| r.period)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .skip(1)
        .collect();
    let mut names = data.regressor_names.clone();
    names.extend(periods.iter().map(|p| format!("period_{p}")));
    let rows = data
        .rows
        .iter()
        .map(|r| {
            let mut regs = r.regressors.clone();
            regs.extend(periods.iter().map(|&p| if r.period == p { 1.0 } else { 0.0 }));
            PanelRow {
                regressors: regs,
                ..r.clone()
            }
        })
        .collect();
    PanelDataset {
        regressor_names: names,
        rows,
        ..data.clone()
    }
}

impl FeResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// `#`-prefixed metadata lines followed by
    /// `regressor,estimate,se,t,p,stars`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# response={}", self.response).unwrap();
        writeln!(s, "# n_observations={}", self.n_observations).unwrap();
        writeln!(s, "# n_entities={}", self.n_entities).unwrap();
        writeln!(s, "# n_clusters={}", self.n_clusters).unwrap();
        writeln!(s, "# dropped_regressors={}", self.dropped_regressors.join(";")).unwrap();
        writeln!(s, "# dropped_entities={}", self.dropped_entities).unwrap();
        writeln!(s, "# dropped_incomplete={}", self.dropped_incomplete).unwrap();
        let mut out = CsvOut::new(&["regressor", "estimate", "se", "t", "p", "stars"]);
        for c in &self.coefficients {
            out.row([
                c.name.clone(),
                c.estimate.to_string(),
                c.se.to_string(),
                c.t.to_string(),
                c.p.to_string(),
                c.stars.to_string(),
            ]);
        }
        s + &out.finish()
    }
}

/// Lays out several fits side by side, one column per response and one
/// row per regressor, with two-decimal estimates, stars and standard errors
/// in parentheses. `labels` maps variable names to display names.
pub fn format_table(results: &[FeResult], labels: &BTreeMap<String, String>) -> String {
    let label = |s: &str| labels.get(s).cloned().unwrap_or_else(|| s.to_string());
    let mut regressors: Vec<&str> = Vec::new();
    for r in results {
        for c in &r.coefficients {
            if !c.name.starts_with("period_") && !regressors.contains(&c.name.as_str()) {
                regressors.push(&c.name);
            }
        }
    }
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend(results.iter().map(|r| label(&r.response)));
    grid.push(header);
    for name in &regressors {
        let mut est = vec![label(name)];
        let mut se = vec![String::new()];
        for r in results {
            match r.coefficient(name) {
                Some(c) => {
                    est.push(format!("{:.2} {}", c.estimate, c.stars).trim_end().to_string());
                    se.push(format!("({:.2})", c.se));
                }
                None => {
                    est.push("dropped".into());
                    se.push(String::new());
                }
            }
        }
        grid.push(est);
        grid.push(se);
    }
    let mut n = vec!["N".to_string()];
    n.extend(results.iter().map(|r| r.n_observations.to_string()));
    grid.push(n);
    let mut g = vec!["Clusters".to_string()];
    g.extend(results.iter().map(|r| r.n_clusters.to_string()));
    grid.push(g);

    let cols = grid[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|j| grid.iter().map(|row| row[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &grid {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for j in 1..cols {
            line.push_str(&format!("  {:>w$}", row[j], w = widths[j]));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    let effects = if results.iter().any(|r| r.period_effects) {
        "entity and period fixed effects (period indicators not shown)"
    } else {
        "entity fixed effects"
    };
    out.push_str(&format!("* p<0.05, ** p<0.01, *** p<0.001; {effects}; SEs clustered by entity\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(e: &str, p: i32, y: f64, x: &[f64]) -> PanelRow {
        PanelRow {
            entity_id: e.into(),
            period: p,
            response: y,
            regressors: x.to_vec(),
        }
    }

    #[test]
    fn standardize_two_values() {
        let d = PanelDataset::new("y", vec!["x".into()], vec![row("a", 1, 0.0, &[0.0]), row("a", 2, 2.0, &[4.0])]).unwrap();
        let (s, params) = standardize(&d).unwrap();
        assert_eq!(s.rows()[0].response, -1.0);
        assert_eq!(s.rows()[1].response, 1.0);
        assert_eq!(params[1].sd, 2.0);
        let (again, _) = standardize(&s).unwrap();
        for (a, b) in again.rows().iter().zip(s.rows()) {
            assert!((a.response - b.response).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_named() {
        let d = PanelDataset::new("y", vec!["x".into()], vec![row("a", 1, 0.0, &[3.0]), row("a", 2, 2.0, &[3.0])]).unwrap();
        assert_eq!(standardize(&d).unwrap_err(), FeError::ZeroVariance("x".into()));
    }

    #[test]
    fn within_demeans_and_flags() {
        let d = PanelDataset::new(
            "y",
            vec!["x".into(), "c".into()],
            vec![
                row("a", 1, 1.0, &[1.0, 5.0]),
                row("a", 2, 3.0, &[2.0, 5.0]),
                row("b", 1, 7.0, &[0.0, 1.0]),
            ],
        )
        .unwrap();
        let w = within_transform(&d).unwrap();
        assert_eq!(w.dropped_entities, vec!["b".to_string()]);
        assert_eq!(w.constant_regressors, vec!["c".to_string()]);
        let ys: Vec<f64> = w.data.rows().iter().map(|r| r.response).collect();
        assert_eq!(ys, vec![-1.0, 1.0]);
    }

    #[test]
    fn no_multi_period_entities() {
        let d = PanelDataset::new("y", vec!["x".into()], vec![row("a", 1, 1.0, &[1.0]), row("b", 1, 2.0, &[2.0])]).unwrap();
        assert_eq!(within_transform(&d).unwrap_err(), FeError::NoMultiPeriodEntities);
    }

    #[test]
    fn exact_fit_recovers_slope() {
        let mut rows = Vec::new();
        for e in 0..6 {
            for p in 0..3 {
                let x = (e * 7 + p * 3) as f64 % 5.0 + p as f64;
                rows.push(row(&format!("e{e}"), p, 2.0 * x + e as f64 * 10.0, &[x]));
            }
        }
        let d = PanelDataset::new("y", vec!["x".into()], rows).unwrap();
        let fit = fit_fe(&d, FeOptions::default()).unwrap();
        assert!((fit.coefficients[0].estimate - 2.0).abs() < 1e-10);
        assert!(fit.coefficients[0].se < 1e-8);
        assert_eq!(fit.n_clusters, 6);
    }

    #[test]
    fn collinear_columns_rejected() {
        let mut rows = Vec::new();
        for e in 0..4 {
            for p in 0..3 {
                let x = ((e + 1) * (p + 2)) as f64;
                rows.push(row(&format!("e{e}"), p, x + p as f64, &[x, 2.0 * x]));
            }
        }
        let d = PanelDataset::new("y", vec!["x".into(), "x2".into()], rows).unwrap();
        assert_eq!(fit_fe(&d, FeOptions::default()).unwrap_err(), FeError::RankDeficient(vec!["x2".into()]));
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.049), "*");
        assert_eq!(stars(0.05), "");
        assert_eq!(stars(0.009), "**");
        assert_eq!(stars(0.01), "*");
        assert_eq!(stars(0.0009), "***");
        assert_eq!(stars(0.001), "**");
    }

    #[test]
    fn too_few_clusters() {
        let d = PanelDataset::new(
            "y",
            vec!["x".into()],
            vec![row("a", 1, 1.0, &[1.0]), row("a", 2, 2.0, &[3.0]), row("a", 3, 2.5, &[4.0])],
        )
        .unwrap();
        assert_eq!(fit_fe(&d, FeOptions::default()).unwrap_err(), FeError::TooFewClusters(1));
    }

    #[test]
    fn duplicate_observation() {
        let err = PanelDataset::new("y", vec![], vec![row("a", 1, 1.0, &[]), row("a", 1, 2.0, &[])]).unwrap_err();
        assert!(matches!(err, FeError::DuplicateObservation { .. }));
    }
}
