//! Seeded synthetic data with known ground truth.
//!
//! Every generator draws from [`crate::rng::substream`] streams keyed by the
//! unit being generated (entity, area, ...), so output is identical across
//! runs and thread counts. Each returns its data in the same types the
//! parsers produce, together with a serializable truth record.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{AmenityObservation, AmenityPanel, DimensionWeightTable, Opening, OpeningLog, ReviewEvent, ReviewEventLog, Taxonomy, WidePanel, WideRow};
use crate::defense::PeriodLength;
use crate::rng::substream;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("bad config: {0}")]
    BadConfig(String),
}

fn bad<T>(msg: impl Into<String>) -> Result<T, SimError> {
    Err(SimError::BadConfig(msg.into()))
}

fn check_sd(name: &str, sd: f64) -> Result<(), SimError> {
    if sd.is_finite() && sd >= 0.0 {
        Ok(())
    } else {
        bad(format!("{name} must be a finite value ≥ 0"))
    }
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sd).unwrap().sample(rng)
    }
}

/// Random walk of `n` steps starting from a standard normal draw.
fn walk(rng: &mut ChaCha8Rng, n: usize, step_sd: f64) -> Vec<f64> {
    let mut x = normal(rng, 1.0);
    (0..n)
        .map(|i| {
            if i > 0 {
                x += normal(rng, step_sd);
            }
            x
        })
        .collect()
}

fn entity_id(i: usize) -> String {
    format!("e{i:05}")
}

// ---------------------------------------------------------------- development

/// True coefficients of one scene dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionBetas {
    pub dimension: String,
    pub pct_ba: f64,
    pub median_income: f64,
    pub placebo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DevelopmentConfig {
    pub seed: u64,
    pub n_entities: usize,
    pub periods: Vec<i32>,
    pub betas: Vec<DimensionBetas>,
    pub entity_sd: f64,
    pub noise_sd: f64,
    /// Per-period step sd of the regressor random walks.
    pub walk_sd: f64,
}

pub const URBANE: [&str; 3] = ["self_expression", "glamour", "rationalism"];
pub const COMMUNITARIAN: [&str; 3] = ["tradition", "neighborliness", "egalitarianism"];

impl DevelopmentConfig {
    /// Urbane dimensions rise with education and income (+0.01), the
    /// communitarian ones fall (−0.01); the placebo has no effect.
    pub fn table1_signs(seed: u64) -> Self {
        let betas = URBANE
            .iter()
            .map(|d| (d, 0.01))
            .chain(COMMUNITARIAN.iter().map(|d| (d, -0.01)))
            .map(|(d, b)| DimensionBetas {
                dimension: d.to_string(),
                pct_ba: b,
                median_income: b,
                placebo: 0.0,
            })
            .collect();
        DevelopmentConfig {
            seed,
            n_entities: 2000,
            periods: vec![2000, 2010, 2017],
            betas,
            entity_sd: 1.0,
            noise_sd: 0.02,
            walk_sd: 0.5,
        }
    }
}

pub const DEVELOPMENT_REGRESSORS: [&str; 3] = ["pct_ba", "median_income", "placebo"];

#[derive(Debug, Clone, PartialEq)]
pub struct DevelopmentSim {
    pub panel: WidePanel,
    pub truth: DevelopmentConfig,
}

/// Entity panel of education, income and a placebo (random walks) and one
/// response per dimension: `y = β·x + entity effect + noise`.
pub fn gen_development_panel(config: &DevelopmentConfig) -> Result<DevelopmentSim, SimError> {
    if config.n_entities < 2 || config.periods.len() < 2 {
        return bad("need at least 2 entities and 2 periods");
    }
    if config.periods.windows(2).any(|w| w[1] <= w[0]) {
        return bad("periods must be strictly increasing");
    }
    if config.betas.is_empty() {
        return bad("no dimensions");
    }
    check_sd("entity_sd", config.entity_sd)?;
    check_sd("noise_sd", config.noise_sd)?;
    check_sd("walk_sd", config.walk_sd)?;
    let t = config.periods.len();
    let rows: Vec<Vec<WideRow>> = (0..config.n_entities)
        .into_par_iter()
        .map(|i| {
            let id = entity_id(i);
            let mut rng = substream(config.seed, &format!("development/{id}"));
            let x: Vec<Vec<f64>> = (0..3).map(|_| walk(&mut rng, t, config.walk_sd)).collect();
            let effects: Vec<f64> = config.betas.iter().map(|_| normal(&mut rng, config.entity_sd)).collect();
            (0..t)
                .map(|p| {
                    let mut values: Vec<Option<f64>> = x.iter().map(|col| Some(col[p])).collect();
                    for (b, alpha) in config.betas.iter().zip(&effects) {
                        let y = b.pct_ba * x[0][p] + b.median_income * x[1][p] + b.placebo * x[2][p]
                            + alpha
                            + normal(&mut rng, config.noise_sd);
                        values.push(Some(y));
                    }
                    WideRow {
                        entity_id: id.clone(),
                        period: config.periods[p],
                        values,
                    }
                })
                .collect()
        })
        .collect();
    let mut variables: Vec<String> = DEVELOPMENT_REGRESSORS.iter().map(|s| s.to_string()).collect();
    variables.extend(config.betas.iter().map(|b| b.dimension.clone()));
    let panel = WidePanel::new(variables, rows.into_iter().flatten().collect()).expect("unique keys");
    Ok(DevelopmentSim {
        panel,
        truth: config.clone(),
    })
}

// ------------------------------------------------------------ differentiation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentiationConfig {
    pub seed: u64,
    pub n_entities: usize,
    pub periods: Vec<i32>,
    /// Effect of business density on specialization (γ).
    pub gain: f64,
    pub entity_sd: f64,
    pub noise_sd: f64,
    pub walk_sd: f64,
}

impl Default for DifferentiationConfig {
    fn default() -> Self {
        DifferentiationConfig {
            seed: 0,
            n_entities: 300,
            periods: (2011..=2017).collect(),
            gain: 0.3,
            entity_sd: 0.3,
            noise_sd: 0.5,
            walk_sd: 0.5,
        }
    }
}

pub const DIFFERENTIATION_PLACEBOS: [&str; 4] = ["pct_ba", "population_density", "median_income", "pct_white"];

#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiationSim {
    pub panel: WidePanel,
    pub truth: DifferentiationConfig,
}

/// Columns: `business_density`, the placebos, then `specialization`
/// `= 2 + γ·density + entity effect + noise`.
pub fn gen_differentiation_panel(config: &DifferentiationConfig) -> Result<DifferentiationSim, SimError> {
    if config.n_entities < 2 || config.periods.len() < 2 {
        return bad("need at least 2 entities and 2 periods");
    }
    if config.periods.windows(2).any(|w| w[1] <= w[0]) {
        return bad("periods must be strictly increasing");
    }
    check_sd("entity_sd", config.entity_sd)?;
    check_sd("noise_sd", config.noise_sd)?;
    check_sd("walk_sd", config.walk_sd)?;
    if !config.gain.is_finite() {
        return bad("gain must be finite");
    }
    let t = config.periods.len();
    let rows: Vec<Vec<WideRow>> = (0..config.n_entities)
        .into_par_iter()
        .map(|i| {
            let id = entity_id(i);
            let mut rng = substream(config.seed, &format!("differentiation/{id}"));
            let cols: Vec<Vec<f64>> = (0..1 + DIFFERENTIATION_PLACEBOS.len())
                .map(|_| walk(&mut rng, t, config.walk_sd))
                .collect();
            let alpha = normal(&mut rng, config.entity_sd);
            (0..t)
                .map(|p| {
                    let mut values: Vec<Option<f64>> = cols.iter().map(|c| Some(c[p])).collect();
                    values.push(Some(2.0 + config.gain * cols[0][p] + alpha + normal(&mut rng, config.noise_sd)));
                    WideRow {
                        entity_id: id.clone(),
                        period: config.periods[p],
                        values,
                    }
                })
                .collect()
        })
        .collect();
    let mut variables = vec!["business_density".to_string()];
    variables.extend(DIFFERENTIATION_PLACEBOS.iter().map(|s| s.to_string()));
    variables.push("specialization".into());
    let panel = WidePanel::new(variables, rows.into_iter().flatten().collect()).expect("unique keys");
    Ok(DifferentiationSim {
        panel,
        truth: config.clone(),
    })
}

// ------------------------------------------------------------------ diffusion

/// Adoption-time process, in years after the first opening.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ShapeConfig {
    /// Logistic CDF with rate `k` and midpoint `t0`, truncated to t > 0.
    S { k: f64, t0: f64 },
    /// All-at-once blocks `(time, share)` plus an exponential tail holding
    /// the remaining share.
    C { waves: Vec<(f64, f64)>, tail_rate: f64 },
    /// A steady early segment (exponential times with rate `rate`,
    /// truncated at `span` years, holding `share`), then equal waves.
    Hybrid {
        rate: f64,
        span: f64,
        share: f64,
        wave_times: Vec<f64>,
    },
}

impl ShapeConfig {
    pub fn default_s() -> Self {
        ShapeConfig::S { k: 1.0, t0: 10.0 }
    }

    pub fn default_c() -> Self {
        ShapeConfig::C {
            waves: vec![(0.25, 0.3), (1.0, 0.2), (2.0, 0.1)],
            tail_rate: 0.5,
        }
    }

    pub fn default_hybrid() -> Self {
        ShapeConfig::Hybrid {
            rate: 0.1,
            span: 30.0,
            share: 0.72,
            wave_times: vec![35.0, 40.0, 45.0, 50.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionSimConfig {
    pub seed: u64,
    pub n: usize,
    pub shape: ShapeConfig,
    pub start_date: NaiveDate,
    /// Attach `metro_size` (falling with adoption order) and `pct_ba`
    /// (rising with adoption order) to each opening's region.
    pub covariates: bool,
}

impl DiffusionSimConfig {
    pub fn new(seed: u64, n: usize, shape: ShapeConfig) -> Self {
        DiffusionSimConfig {
            seed,
            n,
            shape,
            start_date: NaiveDate::from_ymd_opt(1990, 1, 1).unwrap(),
            covariates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSim {
    pub openings: OpeningLog,
    pub truth: DiffusionSimConfig,
}

fn adoption_times(config: &DiffusionSimConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, SimError> {
    let n = config.n;
    // A pilot location at t = 0 anchors the time origin.
    let mut times = vec![0.0];
    let rest = n - 1;
    match &config.shape {
        ShapeConfig::S { k, t0 } => {
            if !(*k > 0.0 && k.is_finite() && t0.is_finite()) {
                return bad("S shape needs k > 0 and finite t0");
            }
            let f0 = 1.0 / (1.0 + (k * t0).exp());
            for _ in 0..rest {
                let u: f64 = rng.random_range(f0..1.0);
                times.push((t0 + (u / (1.0 - u)).ln() / k).max(0.0));
            }
        }
        ShapeConfig::C { waves, tail_rate } => {
            let total: f64 = waves.iter().map(|w| w.1).sum();
            if waves.iter().any(|(t, s)| !(*t >= 0.0 && *s >= 0.0)) || total > 1.0 + 1e-12 {
                return bad("waves need times ≥ 0 and shares summing to at most 1");
            }
            if !(*tail_rate > 0.0) {
                return bad("tail_rate must be > 0");
            }
            let mut placed = 0;
            for (t, s) in waves {
                let m = ((s * rest as f64).round() as usize).min(rest - placed);
                times.extend(std::iter::repeat_n(*t, m));
                placed += m;
            }
            let tail = Exp::new(*tail_rate).unwrap();
            for _ in placed..rest {
                times.push(tail.sample(rng));
            }
        }
        ShapeConfig::Hybrid {
            rate,
            span,
            share,
            wave_times,
        } => {
            if !(*rate > 0.0 && *span > 0.0 && (0.0..=1.0).contains(share)) || wave_times.is_empty() {
                return bad("hybrid needs rate > 0, span > 0, share in [0, 1] and at least one wave");
            }
            let early = ((share * rest as f64).round() as usize).min(rest);
            // Jittered quantiles of the truncated exponential: one draw per
            // stratum keeps the early curve close to its expected shape.
            let cap = 1.0 - (-rate * span).exp();
            for i in 0..early {
                let u = cap * (i as f64 + rng.random::<f64>()) / early as f64;
                times.push(-(1.0 - u).ln() / rate);
            }
            let per_wave = (rest - early) / wave_times.len();
            let mut left = rest - early;
            for (i, t) in wave_times.iter().enumerate() {
                let m = if i + 1 == wave_times.len() { left } else { per_wave };
                times.extend(std::iter::repeat_n(*t, m));
                left -= m;
            }
        }
    }
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// Dated openings whose adoption curve follows the configured shape.
pub fn gen_diffusion_series(config: &DiffusionSimConfig) -> Result<DiffusionSim, SimError> {
    if config.n == 0 {
        return bad("n must be at least 1");
    }
    let mut rng = substream(config.seed, "diffusion/times");
    let times = adoption_times(config, &mut rng)?;
    let mut cov_rng = substream(config.seed, "diffusion/covariates");
    let n = times.len() as f64;
    let records = times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let covariates = if config.covariates {
                let rank = i as f64 / n;
                [
                    ("metro_size".to_string(), 3.0 * (-2.0 * rank).exp() + normal(&mut cov_rng, 0.1)),
                    ("pct_ba".to_string(), 20.0 + 15.0 * rank + normal(&mut cov_rng, 0.5)),
                ]
                .into_iter()
                .collect()
            } else {
                BTreeMap::new()
            };
            Opening {
                location_id: format!("L{i:06}"),
                open_date: config.start_date + Duration::days((t * 365.25).round() as i64),
                region_id: format!("R{i:06}"),
                covariates,
            }
        })
        .collect();
    Ok(DiffusionSim {
        openings: OpeningLog::from_records(records).expect("unique ids"),
        truth: config.clone(),
    })
}

// -------------------------------------------------------------------- defense

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenseSimConfig {
    pub seed: u64,
    pub n_areas: usize,
    pub n_periods: usize,
    pub start_year: i32,
    pub n_regulars: usize,
    /// Mean events per regular per period.
    pub regular_rate: f64,
    /// Sd of the per-period shock to total regular activity.
    pub noise_sd: f64,
    /// Mean number of similar-taste newcomers per period.
    pub background_newcomers: f64,
    /// Periods (0-based, from the first period) with a newcomer burst.
    pub bursts: Vec<usize>,
    /// Distant-taste newcomer events per burst.
    pub burst_size: usize,
    /// Extra regular events in the period after a burst, per burst event.
    pub gain: f64,
}

impl Default for DefenseSimConfig {
    fn default() -> Self {
        DefenseSimConfig {
            seed: 0,
            n_areas: 1,
            n_periods: 80,
            start_year: 2012,
            n_regulars: 30,
            regular_rate: 2.0,
            noise_sd: 8.0,
            background_newcomers: 3.0,
            bursts: vec![10],
            burst_size: 100,
            gain: 0.8,
        }
    }
}

/// Categories regulars and background newcomers use.
pub const HOME_CATEGORIES: [&str; 5] = ["cafes", "diners", "pizza", "bars", "pubs"];
/// Categories of burst newcomers.
pub const DISTANT_CATEGORIES: [&str; 5] = ["vape_shops", "comic_books", "skate_shops", "tattoo", "galleries"];

/// The taxonomy behind the defense generator's categories.
pub fn defense_taxonomy() -> Taxonomy {
    Taxonomy::from_edges(
        [
            ("restaurants", None),
            ("nightlife", None),
            ("shopping", None),
            ("arts", None),
            ("cafes", Some("restaurants")),
            ("diners", Some("restaurants")),
            ("pizza", Some("restaurants")),
            ("bars", Some("nightlife")),
            ("pubs", Some("nightlife")),
            ("cocktail_bars", Some("bars")),
            ("vape_shops", Some("shopping")),
            ("comic_books", Some("shopping")),
            ("skate_shops", Some("shopping")),
            ("tattoo", Some("arts")),
            ("galleries", Some("arts")),
        ],
        true,
    )
    .expect("static taxonomy is valid")
}

#[derive(Debug, Clone)]
pub struct DefenseSim {
    pub events: ReviewEventLog,
    pub taxonomy: Taxonomy,
    pub truth: DefenseSimConfig,
}

/// Home venues carry a pair of home categories; distant venues one
/// distant category.
fn home_venues() -> Vec<Vec<&'static str>> {
    let mut out = Vec::new();
    for i in 0..HOME_CATEGORIES.len() {
        for j in i + 1..HOME_CATEGORIES.len() {
            out.push(vec![HOME_CATEGORIES[i], HOME_CATEGORIES[j]]);
        }
    }
    out
}

/// Review log in which regulars keep a stable taste, occasional bursts of
/// distant-taste newcomers arrive, and regulars respond one period later
/// with `gain × burst_size` extra events.
pub fn gen_defense_events(config: &DefenseSimConfig) -> Result<DefenseSim, SimError> {
    if config.n_areas == 0 || config.n_periods == 0 || config.n_regulars == 0 {
        return bad("need at least one area, period and regular");
    }
    check_sd("noise_sd", config.noise_sd)?;
    if !(config.regular_rate >= 0.0 && config.background_newcomers >= 0.0 && config.gain >= 0.0) {
        return bad("rates and gain must be ≥ 0");
    }
    if config.bursts.iter().any(|&b| b >= config.n_periods) {
        return bad("burst period outside the simulated range");
    }
    let first = config.start_year as i64 * 4;
    let taxonomy = defense_taxonomy();
    let homes = home_venues();
    let per_area: Vec<Vec<ReviewEvent>> = (0..config.n_areas)
        .into_par_iter()
        .map(|a| {
            let area = format!("area{:02}", a + 1);
            let mut rng = substream(config.seed, &format!("defense/{area}"));
            let mut events = Vec::new();
            let mut push = |rng: &mut ChaCha8Rng, user: String, venue: String, cats: &[&str], p: usize| {
                let start = PeriodLength::Quarter.start(first + p as i64);
                let secs = rng.random_range(0..89 * 86_400);
                events.push(ReviewEvent {
                    timestamp: start + Duration::seconds(secs),
                    user_id: user,
                    venue_id: format!("{area}-{venue}"),
                    area_id: area.clone(),
                    categories: cats.iter().map(|c| c.to_string()).collect(),
                });
            };
            let mut newcomer = 0usize;
            for p in 0..config.n_periods {
                let base = config.n_regulars as f64 * config.regular_rate + normal(&mut rng, config.noise_sd);
                let mut n_regular = base.round().max(0.0) as usize;
                if p > 0 && config.bursts.contains(&(p - 1)) {
                    n_regular += (config.gain * config.burst_size as f64).round() as usize;
                }
                for _ in 0..n_regular {
                    let r = rng.random_range(0..config.n_regulars);
                    let v = rng.random_range(0..homes.len());
                    push(&mut rng, format!("{area}-r{r:03}"), format!("h{v:02}"), &homes[v], p);
                }
                let k = if config.background_newcomers > 0.0 {
                    Poisson::new(config.background_newcomers).unwrap().sample(&mut rng) as usize
                } else {
                    0
                };
                for _ in 0..k {
                    let v = rng.random_range(0..homes.len());
                    push(&mut rng, format!("{area}-n{newcomer:05}"), format!("h{v:02}"), &homes[v], p);
                    newcomer += 1;
                }
                if config.bursts.contains(&p) {
                    for j in 0..config.burst_size {
                        let v = rng.random_range(0..DISTANT_CATEGORIES.len());
                        push(
                            &mut rng,
                            format!("{area}-b{p:02}-{j:04}"),
                            format!("d{v:02}"),
                            &[DISTANT_CATEGORIES[v]],
                            p,
                        );
                    }
                }
            }
            events
        })
        .collect();
    let events = ReviewEventLog::new(per_area.into_iter().flatten().collect(), &taxonomy).expect("valid categories");
    Ok(DefenseSim {
        events,
        taxonomy,
        truth: config.clone(),
    })
}

// -------------------------------------------------------------------- amenity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmenitySimConfig {
    pub seed: u64,
    /// Areas per city; area ids are `<city>:<n>`.
    pub areas_per_city: usize,
    /// City name and yearly log-growth of urbane amenity counts. Communitarian
    /// amenities shrink at the same rate.
    pub cities: Vec<(String, f64)>,
    pub years: Vec<i32>,
    /// Mean count per (area, amenity) in the first year.
    pub base_count: f64,
}

impl Default for AmenitySimConfig {
    fn default() -> Self {
        AmenitySimConfig {
            seed: 0,
            areas_per_city: 30,
            cities: vec![("toronto".into(), 0.08), ("phoenix".into(), -0.02)],
            years: (2008..=2017).collect(),
            base_count: 6.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AmenitySim {
    pub panel: AmenityPanel,
    pub weights: DimensionWeightTable,
    pub truth: AmenitySimConfig,
}

/// Poisson amenity counts over the illustrative weight table's codes. Codes
/// leaning urbane (self-expression weight above tradition weight) grow at the
/// city's rate, the rest shrink at it, each area with its own base mix.
pub fn gen_amenity_panel(config: &AmenitySimConfig) -> Result<AmenitySim, SimError> {
    if config.years.is_empty() || config.cities.is_empty() || config.areas_per_city == 0 {
        return bad("need at least one year, city and area");
    }
    if !(config.base_count.is_finite() && config.base_count > 0.0) {
        return bad("base_count must be positive");
    }
    if config.cities.iter().any(|(_, g)| !g.is_finite()) {
        return bad("growth rates must be finite");
    }
    let weights = DimensionWeightTable::illustrative();
    let codes: Vec<(String, f64)> = weights
        .amenity_codes()
        .into_iter()
        .map(|c| {
            let lean = weights.weight(c, "self_expression").unwrap() - weights.weight(c, "tradition").unwrap();
            (c.to_string(), lean.signum())
        })
        .collect();
    let first = config.years[0];
    let areas: Vec<(String, f64)> = config
        .cities
        .iter()
        .flat_map(|(city, g)| (0..config.areas_per_city).map(move |i| (format!("{city}:{i:03}"), *g)))
        .collect();
    let per_area: Vec<Vec<AmenityObservation>> = areas
        .par_iter()
        .map(|(area, growth)| {
            let mut rng = substream(config.seed, &format!("amenity/{area}"));
            let mix: Vec<f64> = codes.iter().map(|_| normal(&mut rng, 0.5).exp()).collect();
            let mut out = Vec::new();
            for &year in &config.years {
                let t = (year - first) as f64;
                for ((code, lean), m) in codes.iter().zip(&mix) {
                    let rate = config.base_count * m * (lean * growth * t).exp();
                    let count = Poisson::new(rate.max(1e-9)).unwrap().sample(&mut rng) as u64;
                    out.push(AmenityObservation {
                        area_id: area.clone(),
                        year,
                        amenity_code: code.clone(),
                        count,
                    });
                }
            }
            out
        })
        .collect();
    let panel = AmenityPanel::from_observations(per_area.into_iter().flatten()).expect("unique keys");
    Ok(AmenitySim {
        panel,
        weights,
        truth: config.clone(),
    })
}

// ------------------------------------------------------------- specialization

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecializationSimConfig {
    pub seed: u64,
    /// Areas per group; area ids are `<group>:<n>`.
    pub areas_per_group: usize,
    pub groups: Vec<String>,
    pub years: Vec<i32>,
    pub events_per_area_year: usize,
}

impl Default for SpecializationSimConfig {
    fn default() -> Self {
        SpecializationSimConfig {
            seed: 0,
            areas_per_group: 20,
            groups: vec!["toronto".into(), "phoenix".into()],
            years: (2011..=2017).collect(),
            events_per_area_year: 15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpecializationSim {
    pub events: ReviewEventLog,
    pub taxonomy: Taxonomy,
    /// Depth drawn from in each year.
    pub depth_by_year: BTreeMap<i32, u32>,
    pub truth: SpecializationSimConfig,
}

/// A balanced four-level taxonomy: 4 roots, 3 children each, 3 grandchildren
/// each, 2 leaves each. Ids encode the path, e.g. `c2.1.3`.
pub fn balanced_taxonomy() -> Taxonomy {
    let mut edges: Vec<(String, Option<String>)> = Vec::new();
    for a in 1..=4 {
        let r = format!("c{a}");
        edges.push((r.clone(), None));
        for b in 1..=3 {
            let c = format!("{r}.{b}");
            edges.push((c.clone(), Some(r.clone())));
            for d in 1..=3 {
                let g = format!("{c}.{d}");
                edges.push((g.clone(), Some(c.clone())));
                for e in 1..=2 {
                    edges.push((format!("{g}.{e}"), Some(g.clone())));
                }
            }
        }
    }
    Taxonomy::from_edges(edges, true).expect("static taxonomy is valid")
}

/// Events whose categories are drawn from ever deeper taxonomy levels as
/// the years pass, so cumulative specialization cannot fall.
pub fn gen_specialization_events(config: &SpecializationSimConfig) -> Result<SpecializationSim, SimError> {
    if config.years.is_empty() || config.groups.is_empty() || config.areas_per_group == 0 {
        return bad("need at least one year, group and area");
    }
    if config.years.windows(2).any(|w| w[1] <= w[0]) {
        return bad("years must be strictly increasing");
    }
    let taxonomy = balanced_taxonomy();
    let mut by_depth: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for n in taxonomy.nodes() {
        by_depth.entry(taxonomy.depth(n).unwrap()).or_default().push(n);
    }
    let span = (config.years.len() - 1).max(1) as f64;
    let depth_by_year: BTreeMap<i32, u32> = config
        .years
        .iter()
        .enumerate()
        .map(|(i, y)| (*y, 1 + (3.0 * i as f64 / span).round() as u32))
        .collect();
    let areas: Vec<String> = config
        .groups
        .iter()
        .flat_map(|g| (0..config.areas_per_group).map(move |i| format!("{g}:{i:03}")))
        .collect();
    let per_area: Vec<Vec<ReviewEvent>> = areas
        .par_iter()
        .map(|area| {
            let mut rng = substream(config.seed, &format!("specialization/{area}"));
            let mut out = Vec::new();
            for (&year, &depth) in &depth_by_year {
                let pool = &by_depth[&depth];
                let start = NaiveDate::from_ymd_opt(year, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap().and_utc();
                for j in 0..config.events_per_area_year {
                    let cat = pool[rng.random_range(0..pool.len())];
                    out.push(ReviewEvent {
                        timestamp: start + Duration::seconds(rng.random_range(0..364 * 86_400)),
                        user_id: format!("u{:04}", rng.random_range(0..5000)),
                        venue_id: format!("{area}-v{year}-{j:03}"),
                        area_id: area.clone(),
                        categories: [cat.to_string()].into_iter().collect(),
                    });
                }
            }
            out
        })
        .collect();
    let events = ReviewEventLog::new(per_area.into_iter().flatten().collect(), &taxonomy).expect("valid categories");
    Ok(SpecializationSim {
        events,
        taxonomy,
        depth_by_year,
        truth: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{adoption_series, adoption_series_annual, classify_curve, Shape};
    use crate::panel_fe::{fit_fe, FeOptions, PanelDataset};

    #[test]
    fn development_noise_free_recovery() {
        let mut config = DevelopmentConfig::table1_signs(7);
        config.n_entities = 50;
        config.noise_sd = 0.0;
        let sim = gen_development_panel(&config).unwrap();
        for b in &config.betas {
            let ds = PanelDataset::from_wide(&sim.panel, &b.dimension, &DEVELOPMENT_REGRESSORS).unwrap();
            let fit = fit_fe(&ds, FeOptions::default()).unwrap();
            assert!((fit.coefficients[0].estimate - b.pct_ba).abs() < 1e-8);
            assert!((fit.coefficients[1].estimate - b.median_income).abs() < 1e-8);
            assert!(fit.coefficients[2].estimate.abs() < 1e-8);
        }
    }

    #[test]
    fn differentiation_noise_free_recovery() {
        let config = DifferentiationConfig {
            noise_sd: 0.0,
            n_entities: 40,
            ..Default::default()
        };
        let sim = gen_differentiation_panel(&config).unwrap();
        let ds = PanelDataset::from_wide(&sim.panel, "specialization", &["business_density"]).unwrap();
        let fit = fit_fe(&ds, FeOptions::default()).unwrap();
        assert!((fit.coefficients[0].estimate - 0.3).abs() < 1e-8);
    }

    #[test]
    fn generators_are_deterministic() {
        let config = DevelopmentConfig {
            n_entities: 20,
            ..DevelopmentConfig::table1_signs(3)
        };
        let a = gen_development_panel(&config).unwrap().panel.to_csv();
        let b = gen_development_panel(&config).unwrap().panel.to_csv();
        assert_eq!(a, b);
        let d = DefenseSimConfig::default();
        assert_eq!(gen_defense_events(&d).unwrap().events.to_csv(), gen_defense_events(&d).unwrap().events.to_csv());
    }

    #[test]
    fn bad_configs() {
        let mut config = DevelopmentConfig::table1_signs(0);
        config.n_entities = 1;
        assert!(gen_development_panel(&config).is_err());
        assert!(gen_diffusion_series(&DiffusionSimConfig::new(0, 0, ShapeConfig::default_s())).is_err());
        let d = DefenseSimConfig {
            bursts: vec![99],
            ..Default::default()
        };
        assert!(gen_defense_events(&d).is_err());
    }

    #[test]
    fn single_adopter() {
        let sim = gen_diffusion_series(&DiffusionSimConfig::new(1, 1, ShapeConfig::default_s())).unwrap();
        assert_eq!(adoption_series(&sim.openings).unwrap().points(), &[(0.0, 1.0)]);
    }

    #[test]
    fn wave_series_is_c() {
        let sim = gen_diffusion_series(&DiffusionSimConfig::new(11, 200, ShapeConfig::default_c())).unwrap();
        let class = classify_curve(&adoption_series(&sim.openings).unwrap()).unwrap();
        assert_eq!(class.class, Shape::C);
    }

    #[test]
    fn amenity_panel_is_seeded_and_drifts() {
        let config = AmenitySimConfig::default();
        let a = gen_amenity_panel(&config).unwrap();
        let b = gen_amenity_panel(&config).unwrap();
        assert_eq!(a.panel, b.panel);
        let urbane = |area: &str, year: i32| a.panel.count(area, year, "ART_GALLERY").unwrap() as f64;
        let (early, late): (f64, f64) = (0..30)
            .map(|i| {
                let area = format!("toronto:{i:03}");
                (urbane(&area, 2008), urbane(&area, 2017))
            })
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        assert!(late > 1.5 * early, "{early} -> {late}");
        assert!(gen_amenity_panel(&AmenitySimConfig { base_count: 0.0, ..config }).is_err());
    }

    #[test]
    fn hybrid_series_is_hybrid() {
        let hybrid = (0..20)
            .filter(|&seed| {
                let sim = gen_diffusion_series(&DiffusionSimConfig::new(seed, 400, ShapeConfig::default_hybrid())).unwrap();
                let class = classify_curve(&adoption_series_annual(&sim.openings).unwrap()).unwrap();
                class.class == Shape::Hybrid
            })
            .count();
        assert!(hybrid >= 18, "{hybrid}/20 hybrid");
    }

    #[test]
    fn no_bursts_means_no_distant_newcomers() {
        let sim = gen_defense_events(&DefenseSimConfig {
            bursts: vec![],
            ..Default::default()
        })
        .unwrap();
        assert!(sim.events.events().iter().all(|e| !e.user_id.contains("-b")));
    }
}
