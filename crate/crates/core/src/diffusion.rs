//! Adoption curves and their S/C classification.
//!
//! An [`AdoptionSeries`] is the cumulative share of locations open by each
//! distinct opening date, with time in years since the first opening. Two
//! curves are fit by least squares:
//!
//! - logistic `F(t) = 1 / (1 + exp(−k (t − t0)))`, the S shape;
//! - saturating `F(t) = 1 − exp(−λ t)`, the C shape.
//!
//! Each fit starts from the best point of a fixed grid and is refined by
//! Gauss–Newton with step halving, so results are deterministic. The fits
//! are made to cumulative proportions, whose residuals are autocorrelated;
//! AIC is therefore used only to compare the two shapes, not for inference.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{CsvOut, OpeningLog};
use crate::stats;

pub const PARAM_MIN: f64 = 1e-3;
pub const PARAM_MAX: f64 = 50.0;
const MAX_ITER: usize = 200;
const STEP_TOL: f64 = 1e-10;
/// |ΔAIC| above this separates S or C from Hybrid.
pub const AIC_MARGIN: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum DiffusionError {
    #[error("opening log is empty")]
    EmptyLog,
    #[error("{model:?} fit needs at least {need} points, got {got}")]
    TooFewPoints { model: Model, need: usize, got: usize },
    #[error("cohort sizes sum to {requested} but only {total} openings exist")]
    BoundariesExceedTotal { requested: usize, total: usize },
    #[error("no opening carries covariate `{0}`")]
    UnknownCovariate(String),
    #[error("invalid adoption series: {0}")]
    InvalidSeries(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Model {
    Logistic,
    Saturating,
}

impl Model {
    pub fn n_params(self) -> usize {
        match self {
            Model::Logistic => 2,
            Model::Saturating => 1,
        }
    }

    fn min_points(self) -> usize {
        match self {
            Model::Logistic => 3,
            Model::Saturating => 2,
        }
    }

    /// Curve value at `t` for parameters `p`.
    pub fn eval(self, p: &[f64], t: f64) -> f64 {
        match self {
            Model::Logistic => 1.0 / (1.0 + (-p[0] * (t - p[1])).exp()),
            Model::Saturating => -(-p[0] * t).exp_m1(),
        }
    }

    /// Partial derivatives with respect to each parameter.
    fn gradient(self, p: &[f64], t: f64) -> [f64; 2] {
        match self {
            Model::Logistic => {
                let f = self.eval(p, t);
                let s = f * (1.0 - f);
                [(t - p[1]) * s, -p[0] * s]
            }
            Model::Saturating => [t * (-p[0] * t).exp(), 0.0],
        }
    }
}

/// Cumulative adoption proportions at distinct times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdoptionSeries {
    points: Vec<(f64, f64)>,
    n_total: usize,
}

impl AdoptionSeries {
    /// Validates `points`: strictly increasing t ≥ 0, nondecreasing
    /// fractions in [0, 1] ending at exactly 1.
    pub fn new(points: Vec<(f64, f64)>, n_total: usize) -> Result<Self, DiffusionError> {
        let bad = |m: &str| Err(DiffusionError::InvalidSeries(m.to_string()));
        if points.is_empty() {
            return bad("no points");
        }
        if points.iter().any(|(t, f)| !(t.is_finite() && *t >= 0.0 && (0.0..=1.0).contains(f))) {
            return bad("t must be ≥ 0 and fractions in [0, 1]");
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
            return bad("t must increase strictly and fractions must not decrease");
        }
        if points.last().unwrap().1 != 1.0 {
            return bad("final fraction must be 1");
        }
        Ok(AdoptionSeries { points, n_total })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["t", "fraction"]);
        for (t, f) in &self.points {
            out.row([t.to_string(), f.to_string()]);
        }
        out.finish()
    }
}

fn years_since_first(openings: &OpeningLog) -> Result<Vec<f64>, DiffusionError> {
    let first = openings.records().first().ok_or(DiffusionError::EmptyLog)?.open_date;
    Ok(openings
        .records()
        .iter()
        .map(|r| (r.open_date - first).num_days() as f64 / 365.25)
        .collect())
}

fn cumulative(times: &[f64], key: impl Fn(f64) -> f64) -> AdoptionSeries {
    let n = times.len();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let t = key(t);
        let f = if i + 1 == n { 1.0 } else { (i + 1) as f64 / n as f64 };
        match points.last_mut() {
            Some(last) if last.0 == t => last.1 = f,
            _ => points.push((t, f)),
        }
    }
    AdoptionSeries { points, n_total: n }
}

/// One point per distinct opening date; t in years of 365.25 days.
pub fn adoption_series(openings: &OpeningLog) -> Result<AdoptionSeries, DiffusionError> {
    Ok(cumulative(&years_since_first(openings)?, |t| t))
}

/// One point per whole year since the first opening: the point at `t = y`
/// is the share open before the end of year `y`.
pub fn adoption_series_annual(openings: &OpeningLog) -> Result<AdoptionSeries, DiffusionError> {
    Ok(cumulative(&years_since_first(openings)?, f64::floor))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionFit {
    pub model: Model,
    /// `[k, t0]` for the logistic, `[λ]` for the saturating curve.
    pub params: Vec<f64>,
    pub rss: f64,
    pub aic: f64,
    pub n_points: usize,
    /// False when refinement stopped at the iteration cap.
    pub converged: bool,
    pub iterations: usize,
}

fn rss(model: Model, p: &[f64], points: &[(f64, f64)]) -> f64 {
    points.iter().map(|&(t, f)| (f - model.eval(p, t)).powi(2)).sum()
}

pub fn aic(rss: f64, n: usize, n_params: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * n_params as f64
}

fn log_grid(n: usize) -> Vec<f64> {
    let (lo, hi) = (PARAM_MIN.ln(), PARAM_MAX.ln());
    (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn grid(model: Model, t_max: f64) -> Vec<Vec<f64>> {
    match model {
        Model::Logistic => {
            let t0s: Vec<f64> = (0..61).map(|i| t_max * i as f64 / 60.0).collect();
            log_grid(60)
                .into_iter()
                .flat_map(|k| t0s.iter().map(move |&t0| vec![k, t0]))
                .collect()
        }
        Model::Saturating => log_grid(400).into_iter().map(|l| vec![l]).collect(),
    }
}

fn bounds(model: Model, t_max: f64) -> Vec<(f64, f64)> {
    match model {
        Model::Logistic => vec![(PARAM_MIN, PARAM_MAX), (0.0, t_max)],
        Model::Saturating => vec![(PARAM_MIN, PARAM_MAX)],
    }
}

/// Least-squares fit of `model` to `(t, fraction)` points.
pub fn fit_curve(points: &[(f64, f64)], model: Model) -> Result<DiffusionFit, DiffusionError> {
    if points.len() < model.min_points() {
        return Err(DiffusionError::TooFewPoints {
            model,
            need: model.min_points(),
            got: points.len(),
        });
    }
    let t_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let candidates = grid(model, t_max);
    let scores: Vec<f64> = candidates.par_iter().map(|p| rss(model, p, points)).collect();
    // Lowest rss; ties go to the earliest (lexicographically smallest) cell.
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    let mut p = candidates[best].clone();
    let mut current = scores[best];
    let bounds = bounds(model, t_max);
    let np = model.n_params();

    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        // Normal equations of the linearized problem (at most 2×2).
        let (mut a, mut b) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(t, f) in points {
            let g = model.gradient(&p, t);
            let r = f - model.eval(&p, t);
            for i in 0..np {
                b[i] += g[i] * r;
                for j in 0..np {
                    a[i][j] += g[i] * g[j];
                }
            }
        }
        let step = match np {
            1 if a[0][0] > 0.0 => vec![b[0] / a[0][0]],
            2 => {
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                if det.abs() <= f64::EPSILON * (a[0][0] * a[1][1]).abs() || det == 0.0 {
                    converged = true;
                    break;
                }
                vec![
                    (a[1][1] * b[0] - a[0][1] * b[1]) / det,
                    (a[0][0] * b[1] - a[1][0] * b[0]) / det,
                ]
            }
            _ => {
                converged = true;
                break;
            }
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = p
                .iter()
                .zip(&step)
                .zip(&bounds)
                .map(|((x, d), (lo, hi))| (x + scale * d).clamp(*lo, *hi))
                .collect();
            let r = rss(model, &trial, points);
            if r <= current {
                accepted = Some((trial, r));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, r)) = accepted else {
            converged = true;
            break;
        };
        let moved: f64 = trial.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        p = trial;
        current = r;
        if moved <= STEP_TOL * size.max(f64::MIN_POSITIVE) || current == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(DiffusionFit {
        model,
        params: p,
        rss: current,
        aic: aic(current, points.len(), np),
        n_points: points.len(),
        converged,
        iterations,
    })
}

pub fn fit_diffusion(series: &AdoptionSeries, model: Model) -> Result<DiffusionFit, DiffusionError> {
    fit_curve(&series.points, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    S,
    C,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveClass {
    pub class: Shape,
    /// aic(saturating) − aic(logistic); positive favours the S shape.
    pub delta_aic: f64,
    pub logistic: DiffusionFit,
    pub saturating: DiffusionFit,
}

impl CurveClass {
    /// CSV `model,param1,param2,rss,aic,class`.
    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["model", "param1", "param2", "rss", "aic", "class"]);
        for fit in [&self.logistic, &self.saturating] {
            out.row([
                format!("{:?}", fit.model),
                fit.params[0].to_string(),
                fit.params.get(1).map(|x| x.to_string()).unwrap_or_default(),
                fit.rss.to_string(),
                fit.aic.to_string(),
                format!("{:?}", self.class),
            ]);
        }
        out.finish()
    }
}

pub fn classify_curve(series: &AdoptionSeries) -> Result<CurveClass, DiffusionError> {
    let n = series.points.len();
    if n < 4 {
        return Err(DiffusionError::TooFewPoints {
            model: Model::Logistic,
            need: 4,
            got: n,
        });
    }
    let (logistic, saturating) = rayon::join(
        || fit_diffusion(series, Model::Logistic),
        || fit_diffusion(series, Model::Saturating),
    );
    let (logistic, saturating) = (logistic?, saturating?);
    let delta_aic = saturating.aic - logistic.aic;
    let class = if delta_aic > AIC_MARGIN {
        Shape::S
    } else if delta_aic < -AIC_MARGIN {
        Shape::C
    } else {
        Shape::Hybrid
    };
    Ok(CurveClass {
        class,
        delta_aic,
        logistic,
        saturating,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateSummary {
    pub covariate: String,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// Sample standard deviation; `None` below two values.
    pub sd: Option<f64>,
    pub n: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cohort {
    /// 1-based cohort number.
    pub cohort: usize,
    /// Adoption-order index range `[start, end)`.
    pub start: usize,
    pub end: usize,
    pub summaries: Vec<CovariateSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortStats {
    pub cohorts: Vec<Cohort>,
}

impl CohortStats {
    /// CSV `cohort,covariate,mean,median,sd,n`.
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = CsvOut::new(&["cohort", "covariate", "mean", "median", "sd", "n"]);
        for c in &self.cohorts {
            for s in &c.summaries {
                out.row([
                    c.cohort.to_string(),
                    s.covariate.clone(),
                    opt(s.mean),
                    opt(s.median),
                    opt(s.sd),
                    s.n.to_string(),
                ]);
            }
        }
        out.finish()
    }
}

/// Splits openings, in adoption order, into consecutive cohorts of the
/// given sizes and summarizes each covariate per cohort.
pub fn cohort_summary(
    openings: &OpeningLog,
    sizes: &[usize],
    covariates: &[&str],
) -> Result<CohortStats, DiffusionError> {
    let records = openings.records();
    let requested: usize = sizes.iter().sum();
    if requested > records.len() {
        return Err(DiffusionError::BoundariesExceedTotal {
            requested,
            total: records.len(),
        });
    }
    for name in covariates {
        if !records.iter().any(|r| r.covariates.contains_key(*name)) {
            return Err(DiffusionError::UnknownCovariate(name.to_string()));
        }
    }
    let mut cohorts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for (i, &size) in sizes.iter().enumerate() {
        let members = &records[start..start + size];
        let summaries = covariates
            .iter()
            .map(|name| {
                let values: Vec<f64> = members.iter().filter_map(|r| r.covariates.get(*name).copied()).collect();
                CovariateSummary {
                    covariate: name.to_string(),
                    mean: stats::mean(&values),
                    median: stats::median(&values),
                    sd: stats::sample_sd(&values),
                    n: values.len(),
                    missing: size - values.len(),
                }
            })
            .collect();
        cohorts.push(Cohort {
            cohort: i + 1,
            start,
            end: start + size,
            summaries,
        });
        start += size;
    }
    Ok(CohortStats { cohorts })
}
