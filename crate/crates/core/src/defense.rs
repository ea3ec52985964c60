//! Tension and structure in an area's review activity.
//!
//! The maintained quantity is an area's characteristic taste profile,
//! estimated from its regulars' activity in a baseline window. *Tension*
//! T(p) counts events by newcomers whose taste is far from that profile;
//! *structure* S(p) counts regulars' events at venues in the area's top
//! categories. Two tests probe the functional claim: a lagged
//! cross-correlation of the first differences with a circular-shift
//! permutation p-value (structural response), and an OLS slope of
//! ΔS(p+1) on T(p) (significant response). Differencing before correlating
//! keeps shared trends from producing spurious correlation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::data::{CsvOut, ReviewEvent, ReviewEventLog, Taxonomy};
use crate::rng::substream;
use crate::stats::{pearson, t_two_sided_p};

#[derive(Debug, Error, PartialEq)]
pub enum DefenseError {
    #[error("user has no events before the reference time")]
    NoHistory,
    #[error("area `{area}` has {events} baseline regular events, {required} required")]
    InsufficientBaseline {
        area: String,
        events: usize,
        required: usize,
    },
    #[error("series has {len} periods, {required} required")]
    SeriesTooShort { len: usize, required: usize },
    #[error("tension is constant; slope undefined")]
    ZeroVarianceTension,
    #[error("area `{0}` has no events")]
    UnknownArea(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum PeriodLength {
    Month,
    #[default]
    Quarter,
    Year,
}

impl PeriodLength {
    /// Absolute period index of an instant.
    pub fn index(self, t: &DateTime<Utc>) -> i64 {
        let (y, m) = (t.year() as i64, t.month0() as i64);
        match self {
            PeriodLength::Month => y * 12 + m,
            PeriodLength::Quarter => y * 4 + m / 3,
            PeriodLength::Year => y,
        }
    }

    /// First instant of period `index`.
    pub fn start(self, index: i64) -> DateTime<Utc> {
        let (y, m0) = match self {
            PeriodLength::Month => (index.div_euclid(12), index.rem_euclid(12)),
            PeriodLength::Quarter => (index.div_euclid(4), index.rem_euclid(4) * 3),
            PeriodLength::Year => (index, 0),
        };
        NaiveDate::from_ymd_opt(y as i32, m0 as u32 + 1, 1)
            .expect("valid period start")
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc()
    }

    pub fn label(self, index: i64) -> String {
        match self {
            PeriodLength::Month => format!("{}-{:02}", index.div_euclid(12), index.rem_euclid(12) + 1),
            PeriodLength::Quarter => format!("{}Q{}", index.div_euclid(4), index.rem_euclid(4) + 1),
            PeriodLength::Year => index.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum TensionMode {
    /// Number of distant-taste newcomer events.
    #[default]
    Count,
    /// Share of newcomer events that are distant-taste.
    Share,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenseConfig {
    pub period: PeriodLength,
    /// Events in the trailing window needed to count as a regular (r).
    pub regular_min_events: usize,
    /// Trailing window length in periods (W).
    pub window: i64,
    /// Baseline length in periods (B).
    pub baseline_periods: i64,
    /// Number of top categories in the area profile (K).
    pub top_k: usize,
    /// Taste distance above which a newcomer adds tension (θ).
    pub theta: f64,
    pub min_baseline_events: usize,
    pub tension: TensionMode,
    /// Roll categories up to this taxonomy depth before profiling.
    pub rollup_depth: Option<u32>,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            period: PeriodLength::Quarter,
            regular_min_events: 3,
            window: 8,
            baseline_periods: 4,
            top_k: 5,
            theta: 0.5,
            min_baseline_events: 50,
            tension: TensionMode::Count,
            rollup_depth: None,
        }
    }
}

/// A normalized category distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TasteProfile {
    pub distribution: BTreeMap<String, f64>,
    pub n_events: usize,
}

impl TasteProfile {
    /// Fractional attribution: each event spreads weight 1 evenly over its
    /// categories.
    fn from_events<'a>(
        events: impl IntoIterator<Item = &'a ReviewEvent>,
        key: &impl Fn(&'a str) -> &'a str,
    ) -> Option<Self> {
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        let mut n = 0;
        for e in events {
            let cats: BTreeSet<&str> = e.categories.iter().map(|c| key(c)).collect();
            let share = 1.0 / cats.len() as f64;
            for c in cats {
                *counts.entry(c.to_string()).or_default() += share;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let total: f64 = counts.values().sum();
        counts.values_mut().for_each(|v| *v /= total);
        Some(TasteProfile {
            distribution: counts,
            n_events: n,
        })
    }
}

/// Profile of one user's events strictly before `as_of`.
pub fn taste_profile(events: &[ReviewEvent], as_of: DateTime<Utc>) -> Result<TasteProfile, DefenseError> {
    TasteProfile::from_events(events.iter().filter(|e| e.timestamp < as_of), &|c| c).ok_or(DefenseError::NoHistory)
}

/// Cosine distance `1 − a·b / (‖a‖ ‖b‖)`, computed as half the squared
/// distance between the unit-normalized vectors so identical inputs give
/// exactly 0.
pub fn taste_distance(a: &TasteProfile, b: &TasteProfile) -> f64 {
    let norm = |p: &TasteProfile| p.distribution.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    let keys: BTreeSet<&String> = a.distribution.keys().chain(b.distribution.keys()).collect();
    let d2: f64 = keys
        .into_iter()
        .map(|k| {
            let x = a.distribution.get(k).copied().unwrap_or(0.0) / na;
            let y = b.distribution.get(k).copied().unwrap_or(0.0) / nb;
            (x - y).powi(2)
        })
        .sum();
    (d2 / 2.0).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct VisitorPartition {
    pub regulars: BTreeSet<String>,
    pub newcomers: BTreeSet<String>,
    pub other: BTreeSet<String>,
}

/// Per-user activity counts in one area, by absolute period.
struct AreaActivity<'a> {
    by_user: BTreeMap<&'a str, BTreeMap<i64, usize>>,
}

impl<'a> AreaActivity<'a> {
    fn new(events: &'a ReviewEventLog, area: &str, period: PeriodLength) -> Self {
        let mut by_user: BTreeMap<&str, BTreeMap<i64, usize>> = BTreeMap::new();
        for e in events.events().iter().filter(|e| e.area_id == area) {
            *by_user
                .entry(&e.user_id)
                .or_default()
                .entry(period.index(&e.timestamp))
                .or_default() += 1;
        }
        AreaActivity { by_user }
    }

    fn is_regular(&self, user: &str, p: i64, config: &DefenseConfig) -> bool {
        self.by_user.get(user).is_some_and(|periods| {
            periods.range(p - config.window..p).map(|(_, n)| n).sum::<usize>() >= config.regular_min_events
        })
    }

    fn partition(&self, p: i64, config: &DefenseConfig) -> VisitorPartition {
        let mut out = VisitorPartition::default();
        for (&user, periods) in &self.by_user {
            if !periods.contains_key(&p) {
                continue;
            }
            let first = *periods.keys().next().unwrap();
            if self.is_regular(user, p, config) {
                out.regulars.insert(user.to_string());
            } else if first == p {
                out.newcomers.insert(user.to_string());
            } else {
                out.other.insert(user.to_string());
            }
        }
        out
    }
}

/// Partitions the users active in (`area`, `p`). Regulars have at least
/// `r` area events in the `W` periods before `p`; newcomers have their first
/// area event in `p`; everyone else is other. `p` is an absolute period index (see
/// [`PeriodLength::index`]).
pub fn classify_visitors(events: &ReviewEventLog, area: &str, p: i64, config: &DefenseConfig) -> VisitorPartition {
    AreaActivity::new(events, area, config.period).partition(p, config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaProfile {
    pub top_categories: Vec<String>,
    pub distribution: BTreeMap<String, f64>,
    pub baseline_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensionStructureSeries {
    pub area: String,
    pub period: PeriodLength,
    /// Absolute index of the first period in the series.
    pub first_period: i64,
    pub tension: Vec<f64>,
    pub structure: Vec<f64>,
}

impl TensionStructureSeries {
    pub fn len(&self) -> usize {
        self.tension.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tension.is_empty()
    }

    /// CSV `period,T,S` with period labels such as `2015Q1`.
    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["period", "T", "S"]);
        for (i, (t, s)) in self.tension.iter().zip(&self.structure).enumerate() {
            out.row([
                self.period.label(self.first_period + i as i64),
                t.to_string(),
                s.to_string(),
            ]);
        }
        out.finish()
    }
}

fn rollup_key<'a>(taxonomy: &'a Taxonomy, depth: Option<u32>) -> impl Fn(&'a str) -> &'a str + 'a {
    move |c| match depth {
        Some(d) => taxonomy.ancestor_at(c, d).unwrap_or(c),
        None => c,
    }
}

/// Builds the T/S series for `area`, starting right after the baseline.
///
/// The baseline covers the area's first `B` periods. Its regulars are the
/// users who qualify as regulars at the first post-baseline period, and the
/// area profile is their category distribution over baseline events.
pub fn build_series(
    events: &ReviewEventLog,
    area: &str,
    taxonomy: &Taxonomy,
    config: &DefenseConfig,
) -> Result<(TensionStructureSeries, AreaProfile), DefenseError> {
    let key = rollup_key(taxonomy, config.rollup_depth);
    let period = config.period;
    let area_events: Vec<&ReviewEvent> = events.events().iter().filter(|e| e.area_id == area).collect();
    let first = area_events
        .iter()
        .map(|e| period.index(&e.timestamp))
        .min()
        .ok_or_else(|| DefenseError::UnknownArea(area.to_string()))?;
    let last = area_events.iter().map(|e| period.index(&e.timestamp)).max().unwrap();
    let start = first + config.baseline_periods;
    let activity = AreaActivity::new(events, area, period);

    let baseline_regulars: BTreeSet<&str> = activity
        .by_user
        .keys()
        .copied()
        .filter(|u| activity.is_regular(u, start, config))
        .collect();
    let baseline: Vec<&ReviewEvent> = area_events
        .iter()
        .copied()
        .filter(|e| period.index(&e.timestamp) < start && baseline_regulars.contains(e.user_id.as_str()))
        .collect();
    if baseline.len() < config.min_baseline_events || start > last {
        return Err(DefenseError::InsufficientBaseline {
            area: area.to_string(),
            events: baseline.len(),
            required: config.min_baseline_events,
        });
    }
    let profile = TasteProfile::from_events(baseline.iter().copied(), &key).expect("nonempty baseline");
    let mut ranked: Vec<(&String, &f64)> = profile.distribution.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let top: BTreeSet<&str> = ranked.iter().take(config.top_k).map(|(c, _)| c.as_str()).collect();

    let mut by_user: HashMap<&str, Vec<&ReviewEvent>> = HashMap::new();
    for e in events.events() {
        by_user.entry(&e.user_id).or_default().push(e);
    }
    let mut by_period: BTreeMap<i64, Vec<&ReviewEvent>> = BTreeMap::new();
    for e in &area_events {
        by_period.entry(period.index(&e.timestamp)).or_default().push(e);
    }

    let n = (last - start + 1) as usize;
    let (mut tension, mut structure) = (vec![0.0; n], vec![0.0; n]);
    for p in start..=last {
        let Some(evs) = by_period.get(&p) else { continue };
        let part = activity.partition(p, config);
        let as_of = period.start(p + 1);
        let mut distant_cache: BTreeMap<&str, bool> = BTreeMap::new();
        let (mut s, mut distant, mut newcomer_events) = (0usize, 0usize, 0usize);
        for e in evs {
            if part.regulars.contains(&e.user_id) {
                if e.categories.iter().any(|c| top.contains(key(c))) {
                    s += 1;
                }
            } else if part.newcomers.contains(&e.user_id) {
                newcomer_events += 1;
                let is_distant = *distant_cache.entry(&e.user_id).or_insert_with(|| {
                    let history = by_user[e.user_id.as_str()].iter().copied().filter(|x| x.timestamp < as_of);
                    let taste = TasteProfile::from_events(history, &key).expect("newcomer has an event in p");
                    taste_distance(&taste, &profile) > config.theta
                });
                if is_distant {
                    distant += 1;
                }
            }
        }
        let i = (p - start) as usize;
        structure[i] = s as f64;
        tension[i] = match config.tension {
            TensionMode::Count => distant as f64,
            TensionMode::Share if newcomer_events > 0 => distant as f64 / newcomer_events as f64,
            TensionMode::Share => 0.0,
        };
    }
    Ok((
        TensionStructureSeries {
            area: area.to_string(),
            period,
            first_period: start,
            tension,
            structure,
        },
        AreaProfile {
            top_categories: ranked.iter().take(config.top_k).map(|(c, _)| c.to_string()).collect(),
            distribution: profile.distribution,
            baseline_events: baseline.len(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseTest {
    pub best_lag: usize,
    pub correlation: f64,
    pub p_value: f64,
    pub n_permutations: usize,
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Correlations of `dt[i]` with `ds[(i + l + shift) mod m]` for l = 1..=L.
fn lagged_correlations(dt: &[f64], ds: &[f64], max_lag: usize, shift: usize) -> Vec<f64> {
    let m = dt.len();
    (1..=max_lag)
        .map(|l| {
            let x = &dt[..m - l];
            let y: Vec<f64> = (0..m - l).map(|i| ds[(i + l + shift) % m]).collect();
            pearson(x, &y)
        })
        .collect()
}

/// Lagged correlation of ΔT(p) with ΔS(p + l), l = 1..=`max_lag`, and a
/// permutation p-value from circular shifts of ΔS:
/// `(1 + #{shifts with max-over-lags correlation ≥ observed}) / (1 + N)`.
///
/// Shifts that would re-create an observed alignment are excluded, so a
/// perfect response reaches p ≈ 1/N. The price is size: under independence
/// the chance that the largest of the m circular correlations falls among the
/// L observed lags is about L/m, so the false-positive rate is roughly
/// max(α, L/m). Series much shorter than L/α differences over-reject.
pub fn test_structural_response(
    series: &TensionStructureSeries,
    max_lag: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<ResponseTest, DefenseError> {
    // Offsets are drawn from L..=m−L: a shift whose effective lag lands back
    // in 1..=L would re-create an observed alignment.
    let required = (max_lag + 8).max(2 * max_lag + 2);
    if series.len() < required || max_lag == 0 {
        return Err(DefenseError::SeriesTooShort {
            len: series.len(),
            required,
        });
    }
    let dt = diff(&series.tension);
    let ds = diff(&series.structure);
    let observed = lagged_correlations(&dt, &ds, max_lag, 0);
    let mut best_lag = 1;
    for (i, c) in observed.iter().enumerate() {
        if *c > observed[best_lag - 1] {
            best_lag = i + 1;
        }
    }
    let best = observed[best_lag - 1];
    let mut rng = substream(seed, &format!("defense/permutation/{}", series.area));
    let m = dt.len();
    let mut hits = 0usize;
    for _ in 0..n_permutations {
        let shift = rng.random_range(max_lag..=m - max_lag);
        let stat = lagged_correlations(&dt, &ds, max_lag, shift)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if stat >= best - 1e-12 {
            hits += 1;
        }
    }
    Ok(ResponseTest {
        best_lag,
        correlation: best,
        p_value: (hits + 1) as f64 / (n_permutations + 1) as f64,
        n_permutations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceTest {
    pub slope: f64,
    pub p_value: f64,
    pub n: usize,
}

/// OLS slope of ΔS(p+1) on T(p) with a t-test on n − 2 degrees of freedom.
pub fn test_significant_response(series: &TensionStructureSeries) -> Result<SignificanceTest, DefenseError> {
    if series.len() < 10 {
        return Err(DefenseError::SeriesTooShort {
            len: series.len(),
            required: 10,
        });
    }
    let x = &series.tension[..series.len() - 1];
    let y = diff(&series.structure);
    let n = x.len();
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 1e-12 * mx.abs().max(1.0) {
        return Err(DefenseError::ZeroVarianceTension);
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = (sse / (n - 2) as f64 / sxx).sqrt();
    Ok(SignificanceTest {
        slope,
        p_value: t_two_sided_p(slope / se, (n - 2) as f64),
        n,
    })
}
