//! Batch command-line front end.
//!
//! Every subcommand reads CSV inputs, writes fixed-name outputs under
//! `--out`, and records a `manifest.json` with the argv, the fully resolved
//! parameters, the seed and SHA-256 hashes of all inputs and outputs.
//! Nothing time- or host-dependent is written, so reruns are byte-identical.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (or a failed selftest).

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{
    parse_amenity_panel, parse_census, parse_events, parse_openings, parse_taxonomy, parse_weights,
    parse_wide_panel, CensusTable, DataError, DimensionWeightTable, Taxonomy, WidePanel, WideRow,
};
use crate::defense::{
    build_series, test_significant_response, test_structural_response, DefenseConfig, DefenseError,
    PeriodLength, TensionMode,
};
use crate::diffusion::{
    adoption_series, adoption_series_annual, classify_curve, cohort_summary, DiffusionError, Model,
};
use crate::panel_fe::{fit_fe, format_table, standardize, FeError, FeOptions, PanelDataset};
use crate::scenescore::{
    group_means, jenks_classify, performance_scores, score_change, zscore_by_period, ChangeTable,
    ScoreError, ScoreTable,
};
use crate::simulate::{self, SimError};
use crate::specialization::{
    depth_weights, specialization_index, specialization_series, SeriesConfig, SpecializationError,
};
use crate::svg::{self, Chart, Series, Style};

pub const THREADS_ENV: &str = "SCENEKIT_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Specialization(#[from] SpecializationError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Defense(#[from] DefenseError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Invalid(String),
    #[error("selftest failed")]
    SelftestFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "scenekit", version, about = "Scene-change analytics over amenity, review and opening data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Performance scores per (area, year, dimension), raw and z-scored.
    Score(ScoreArgs),
    /// Group means of z-scored performance over time.
    Trend(TrendArgs),
    /// Score change between two years.
    Change(ChangeArgs),
    /// Jenks natural-breaks classes of one dimension's change.
    Jenks(JenksArgs),
    /// Specialization index series per area and group.
    Specialize(SpecializeArgs),
    /// Fixed-effects panel regressions with clustered standard errors.
    Fe(FeArgs),
    /// Fit and classify an adoption curve.
    Diffusion(DiffusionArgs),
    /// Covariate summaries of consecutive adoption cohorts.
    Cohorts(CohortArgs),
    /// Tension/structure series and lagged-response tests per area.
    Defense(DefenseArgs),
    /// Generate seeded synthetic inputs with ground truth.
    Simulate(SimulateArgs),
    /// Run the embedded worked examples and oracle checks.
    Selftest(SelftestArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Score(_) => "score",
            Command::Trend(_) => "trend",
            Command::Change(_) => "change",
            Command::Jenks(_) => "jenks",
            Command::Specialize(_) => "specialize",
            Command::Fe(_) => "fe",
            Command::Diffusion(_) => "diffusion",
            Command::Cohorts(_) => "cohorts",
            Command::Defense(_) => "defense",
            Command::Simulate(_) => "simulate",
            Command::Selftest(_) => "selftest",
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct ScoreArgs {
    /// Amenity panel CSV: area_id,year,amenity_code,count.
    #[arg(long)]
    panel: PathBuf,
    /// Dimension weights CSV; the illustrative table is used when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Builtin {
    All,
    Area,
    City,
}

#[derive(Debug, Args, Serialize)]
struct Grouping {
    /// `all`, `area`, `city` (area id prefix before `:`), or a column of --groups.
    #[arg(long, default_value = "city")]
    group_by: String,
    /// CSV mapping area_id to one or more grouping columns.
    #[arg(long)]
    groups: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TrendArgs {
    /// Score CSV (area_id,year,dimension,score), normally scores_z.csv.
    #[arg(long)]
    scores: PathBuf,
    #[command(flatten)]
    grouping: Grouping,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ChangeArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    from: i32,
    #[arg(long)]
    to: i32,
    /// Standardize per (year, dimension) before differencing.
    #[arg(long)]
    zscore: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct JenksArgs {
    /// Change CSV written by `change`.
    #[arg(long)]
    changes: PathBuf,
    #[arg(long)]
    dimension: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SpecializeArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    #[command(flatten)]
    grouping: Grouping,
    /// Categories stay present this many years after their last event
    /// (cumulative presence when omitted).
    #[arg(long)]
    expiry: Option<u32>,
    /// Average over every occurrence instead of the distinct category set.
    #[arg(long)]
    multiset: bool,
    /// Accept taxonomies deeper than four levels.
    #[arg(long)]
    no_yelp_mode: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ClusterBy {
    Entity,
}

#[derive(Debug, Args, Serialize)]
struct FeArgs {
    /// Wide panel CSV: entity_id,period,<variables...>.
    #[arg(long, conflicts_with_all = ["scores", "census"])]
    panel: Option<PathBuf>,
    /// Score CSV; its dimensions become responses, joined with --census.
    #[arg(long, requires = "census")]
    scores: Option<PathBuf>,
    #[arg(long, requires = "scores")]
    census: Option<PathBuf>,
    /// Comma-separated response variables, one model each.
    #[arg(long, value_delimiter = ',', required = true)]
    response: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    regressors: Vec<String>,
    #[arg(long, value_enum, default_value = "entity")]
    cluster: ClusterBy,
    /// Skip standardizing variables to mean 0, sd 1 before fitting.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    period_effects: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct DiffusionArgs {
    /// Openings CSV: location_id,open_date,region_id.
    #[arg(long)]
    openings: PathBuf,
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Bin cumulative adoption by year instead of per opening.
    #[arg(long)]
    annual: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CohortArgs {
    #[arg(long)]
    openings: PathBuf,
    #[arg(long)]
    covariates: PathBuf,
    /// Comma-separated cohort sizes, in adoption order.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Covariates to summarize; all covariates when omitted.
    #[arg(long, value_delimiter = ',')]
    names: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PeriodArg {
    Month,
    Quarter,
    Year,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum TensionArg {
    Count,
    Share,
}

#[derive(Debug, Args, Serialize)]
struct DefenseArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    #[arg(long)]
    no_yelp_mode: bool,
    /// Areas to analyze; every area in the log when omitted.
    #[arg(long, value_delimiter = ',')]
    areas: Vec<String>,
    #[arg(long, value_enum, default_value = "quarter")]
    period: PeriodArg,
    #[arg(long, default_value_t = 3)]
    regular_min_events: usize,
    #[arg(long, default_value_t = 8)]
    window: i64,
    #[arg(long, default_value_t = 4)]
    baseline_periods: i64,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 50)]
    min_baseline_events: usize,
    #[arg(long, value_enum, default_value = "count")]
    tension: TensionArg,
    #[arg(long)]
    rollup_depth: Option<u32>,
    #[arg(long, default_value_t = 4)]
    max_lag: usize,
    #[arg(long, default_value_t = 2000)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SimModel {
    Development,
    Differentiation,
    Diffusion,
    Defense,
    Specialization,
    Amenity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ShapeArg {
    S,
    C,
    Hybrid,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: SimModel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Entities (panels), adopters (diffusion), areas (defense) or areas per
    /// group (specialization, amenity); the model default when omitted.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "s")]
    shape: ShapeArg,
    /// Density gain (differentiation) or response gain (defense).
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SelftestArgs {
    /// Also write the report and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Errors are reported on standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = thread_pool().and_then(|pool| match pool {
        Some(pool) => pool.install(|| execute(&cli.command, &args)),
        None => execute(&cli.command, &args),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))
}

fn execute(command: &Command, args: &[String]) -> Result<()> {
    let mut ctx = match command {
        Command::Score(a) => Context::new(&a.out)?,
        Command::Trend(a) => Context::new(&a.out)?,
        Command::Change(a) => Context::new(&a.out)?,
        Command::Jenks(a) => Context::new(&a.out)?,
        Command::Specialize(a) => Context::new(&a.out)?,
        Command::Fe(a) => Context::new(&a.out)?,
        Command::Diffusion(a) => Context::new(&a.out)?,
        Command::Cohorts(a) => Context::new(&a.out)?,
        Command::Defense(a) => Context::new(&a.out)?,
        Command::Simulate(a) => Context::new(&a.out)?,
        Command::Selftest(a) => match &a.out {
            Some(out) => Context::new(out)?,
            None => Context::dry(),
        },
    };
    let seed = match command {
        Command::Defense(a) => Some(a.seed),
        Command::Simulate(a) => Some(a.seed),
        _ => None,
    };
    let outcome = match command {
        Command::Score(a) => score(a, &mut ctx),
        Command::Trend(a) => trend(a, &mut ctx),
        Command::Change(a) => change(a, &mut ctx),
        Command::Jenks(a) => jenks(a, &mut ctx),
        Command::Specialize(a) => specialize(a, &mut ctx),
        Command::Fe(a) => fe(a, &mut ctx),
        Command::Diffusion(a) => diffusion(a, &mut ctx),
        Command::Cohorts(a) => cohorts(a, &mut ctx),
        Command::Defense(a) => defense(a, &mut ctx),
        Command::Simulate(a) => simulate_cmd(a, &mut ctx),
        Command::Selftest(_) => selftest(&mut ctx),
    };
    // A failed selftest still leaves its report and manifest behind.
    if outcome.is_ok() || matches!(outcome, Err(CliError::SelftestFailed)) {
        ctx.finish(command, args, seed)?;
    }
    outcome
}

/// Output directory plus the input/output hashes destined for the manifest.
struct Context {
    out: Option<PathBuf>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Context {
    fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out).map_err(io_err(out))?;
        Ok(Context {
            out: Some(out.to_path_buf()),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    fn dry() -> Self {
        Context {
            out: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Records an input's content hash; parsing is left to the data layer.
    fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = &self.out {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(io_err(&path))?;
        }
        self.outputs.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn finish(mut self, command: &Command, args: &[String], seed: Option<u64>) -> Result<()> {
        if self.out.is_none() {
            return Ok(());
        }
        let params = serde_json::to_value(command).map_err(|e| CliError::Invalid(e.to_string()))?;
        let manifest = json!({
            "tool": "scenekit",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": command.name(),
            "argv": args,
            "parameters": params,
            "seed": seed,
            "inputs": std::mem::take(&mut self.inputs),
            "outputs": std::mem::take(&mut self.outputs),
        });
        self.write_json("manifest.json", &manifest)
    }
}

fn warn(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

// ------------------------------------------------------------------- scores

fn score(a: &ScoreArgs, ctx: &mut Context) -> Result<()> {
    ctx.input(&a.panel)?;
    let panel = parse_amenity_panel(&a.panel)?;
    let weights = match &a.weights {
        Some(path) => {
            ctx.input(path)?;
            parse_weights(path)?
        }
        None => {
            warn("no --weights given; using the illustrative weight table");
            DimensionWeightTable::illustrative()
        }
    };
    let missing = weights.missing_core_dimensions();
    if !missing.is_empty() {
        warn(format!("weight table lacks core dimensions: {}", missing.join(", ")));
    }
    if !panel.years_contiguous() {
        warn("panel years are not contiguous");
    }
    let raw = performance_scores(&panel, &weights)?;
    let z = zscore_by_period(&raw)?;
    if z.dropped() > 0 {
        warn(format!("{} scores dropped from zero-spread (year, dimension) slices", z.dropped()));
    }
    ctx.write("scores_raw.csv", &raw.to_csv())?;
    ctx.write("scores_z.csv", &z.to_csv())
}

fn read_scores(path: &Path, ctx: &mut Context) -> Result<ScoreTable> {
    ctx.input(path)?;
    Ok(ScoreTable::from_reader(open(path)?)?)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(io_err(path))
}

/// Resolves `--group-by`/`--groups` into an area → group lookup.
fn grouping(g: &Grouping, ctx: &mut Context) -> Result<impl Fn(&str) -> Option<String>> {
    let builtin = Builtin::from_str(&g.group_by, false).ok();
    let table: Option<BTreeMap<String, String>> = match (builtin, &g.groups) {
        (Some(_), _) => None,
        (None, None) => {
            return Err(CliError::Usage(format!(
                "--group-by {} needs a --groups file (or one of all, area, city)",
                g.group_by
            )))
        }
        (None, Some(path)) => {
            ctx.input(path)?;
            Some(read_group_column(path, &g.group_by)?)
        }
    };
    Ok(move |area: &str| match (builtin, &table) {
        (Some(Builtin::All), _) => Some("all".to_string()),
        (Some(Builtin::Area), _) => Some(area.to_string()),
        (Some(Builtin::City), _) => area.split_once(':').map(|(city, _)| city.to_string()),
        (None, Some(t)) => t.get(area).cloned(),
        (None, None) => None,
    })
}

fn read_group_column(path: &Path, column: &str) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let bad = |e: csv::Error| CliError::Invalid(format!("{}: {e}", path.display()));
    let headers = reader.headers().map_err(bad)?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let area = find("area_id").ok_or_else(|| CliError::Invalid(format!("{}: missing column `area_id`", path.display())))?;
    let col = find(column)
        .ok_or_else(|| CliError::Usage(format!("{}: no grouping column `{column}`", path.display())))?;
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(bad)?;
        let (a, g) = (record.get(area).unwrap_or(""), record.get(col).unwrap_or(""));
        if !a.is_empty() && !g.is_empty() {
            map.insert(a.to_string(), g.to_string());
        }
    }
    Ok(map)
}

fn trend(a: &TrendArgs, ctx: &mut Context) -> Result<()> {
    let scores = read_scores(&a.scores, ctx)?;
    let lookup = grouping(&a.grouping, ctx)?;
    let means = group_means(&scores, lookup)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut charts: BTreeMap<&str, BTreeMap<&str, Vec<(f64, f64)>>> = BTreeMap::new();
    out.write_record(["group_id", "year", "dimension", "unweighted_mean", "n_areas"])
        .expect("in-memory write");
    for ((group, year, dim), (mean, n)) in &means {
        out.write_record([group.clone(), year.to_string(), dim.clone(), mean.to_string(), n.to_string()])
            .expect("in-memory write");
        charts.entry(dim).or_default().entry(group).or_default().push((*year as f64, *mean));
    }
    ctx.write("trend.csv", &csv_string(out))?;
    for (dim, groups) in charts {
        let chart = Chart {
            title: format!("{dim}: unweighted mean of area scores by {}", a.grouping.group_by),
            x_label: "year".into(),
            y_label: "mean score".into(),
            series: groups.into_iter().map(|(g, pts)| Series::line(g, pts)).collect(),
        };
        ctx.write(&format!("trend_{}.svg", file_safe(dim)), &svg::render(&chart))?;
    }
    Ok(())
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn change(a: &ChangeArgs, ctx: &mut Context) -> Result<()> {
    let mut scores = read_scores(&a.scores, ctx)?;
    if a.zscore {
        scores = zscore_by_period(&scores)?;
    }
    ctx.write("change.csv", &score_change(&scores, a.from, a.to)?.to_csv())
}

fn jenks(a: &JenksArgs, ctx: &mut Context) -> Result<()> {
    ctx.input(&a.changes)?;
    let changes = ChangeTable::from_reader(open(&a.changes)?)?;
    let column = changes.dimension(&a.dimension);
    if column.is_empty() {
        return Err(CliError::Invalid(format!("no changes for dimension `{}`", a.dimension)));
    }
    let values: Vec<f64> = column.iter().map(|(_, v)| *v).collect();
    let result = jenks_classify(&values, a.k)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["area_id", "change", "class"]).expect("in-memory write");
    for ((area, v), class) in column.iter().zip(&result.classes) {
        out.write_record([area.to_string(), v.to_string(), class.to_string()])
            .expect("in-memory write");
    }
    ctx.write("jenks.csv", &csv_string(out))?;
    let mut breaks = csv::Writer::from_writer(Vec::new());
    breaks.write_record(["class", "lower", "upper"]).expect("in-memory write");
    for (i, w) in result.breaks.windows(2).enumerate() {
        breaks
            .write_record([(i + 1).to_string(), w[0].to_string(), w[1].to_string()])
            .expect("in-memory write");
    }
    ctx.write("breaks.csv", &csv_string(breaks))
}

// ----------------------------------------------------------- specialization

fn specialize(a: &SpecializeArgs, ctx: &mut Context) -> Result<()> {
    ctx.input(&a.taxonomy)?;
    ctx.input(&a.events)?;
    let taxonomy = parse_taxonomy(&a.taxonomy, !a.no_yelp_mode)?;
    let events = parse_events(&a.events, &taxonomy)?;
    let lookup = grouping(&a.grouping, ctx)?;
    let mut groups = BTreeMap::new();
    for area in events.areas() {
        let g = lookup(area).ok_or_else(|| SpecializationError::UnmappedArea(area.to_string()))?;
        groups.insert(area.to_string(), g);
    }
    let config = SeriesConfig {
        expiry_years: a.expiry,
        multiset: a.multiset,
    };
    let series = specialization_series(&events, &taxonomy, &groups, config)?;
    ctx.write("specialization_groups.csv", &series.groups_csv())?;
    ctx.write("specialization_areas.csv", &series.areas_csv())?;

    let mut by_group: BTreeMap<&str, (Vec<(f64, f64)>, Vec<Option<f64>>)> = BTreeMap::new();
    for g in &series.groups {
        let entry = by_group.entry(&g.group_id).or_default();
        entry.0.push((g.year as f64, g.mean));
        entry.1.push(g.se);
    }
    let presence = match a.expiry {
        Some(y) => format!("presence expires after {y} year(s)"),
        None => "cumulative presence".into(),
    };
    let chart = Chart {
        title: format!("Specialization index by {} ({presence})", a.grouping.group_by),
        x_label: "year".into(),
        y_label: "mean category depth".into(),
        series: by_group
            .into_iter()
            .map(|(g, (pts, se))| Series::line(g, pts).with_whiskers(se))
            .collect(),
    };
    ctx.write("specialization.svg", &svg::render(&chart))
}

// ----------------------------------------------------------- fixed effects

/// Joins a score table with census variables into a wide panel keyed by
/// (area, year). Dimensions are columns; missing cells stay empty.
fn scores_with_census(scores: &ScoreTable, census: &CensusTable) -> Result<WidePanel> {
    let mut variables: Vec<String> = scores.dimensions().into_iter().map(String::from).collect();
    for v in census.variables() {
        if variables.iter().any(|x| x == v) {
            return Err(CliError::Invalid(format!("variable `{v}` is both a score dimension and a census column")));
        }
        variables.push(v.to_string());
    }
    let mut keys: BTreeSet<(String, i32)> = scores.values().keys().map(|(a, y, _)| (a.clone(), *y)).collect();
    keys.extend(census.area_years().into_iter().map(|(a, y)| (a.to_string(), y)));
    let rows = keys
        .into_iter()
        .map(|(area, year)| {
            let values = variables
                .iter()
                .map(|v| scores.get(&area, year, v).or_else(|| census.get(&area, year, v)))
                .collect();
            WideRow {
                entity_id: area,
                period: year,
                values,
            }
        })
        .collect();
    Ok(WidePanel::new(variables, rows)?)
}

fn fe(a: &FeArgs, ctx: &mut Context) -> Result<()> {
    let wide = match (&a.panel, &a.scores, &a.census) {
        (Some(panel), None, None) => {
            ctx.input(panel)?;
            parse_wide_panel(panel)?
        }
        (None, Some(scores), Some(census)) => {
            let scores = read_scores(scores, ctx)?;
            ctx.input(census)?;
            scores_with_census(&scores, &parse_census(census)?)?
        }
        _ => return Err(CliError::Usage("give either --panel or both --scores and --census".into())),
    };
    let regressors: Vec<&str> = a.regressors.iter().map(String::as_str).collect();
    let options = FeOptions {
        period_effects: a.period_effects,
    };
    let mut results = Vec::new();
    let mut scaling = BTreeMap::new();
    for response in &a.response {
        let data = PanelDataset::from_wide(&wide, response, &regressors)?;
        let data = if a.raw {
            data
        } else {
            let (std, s) = standardize(&data)?;
            scaling.insert(response.clone(), s);
            std
        };
        let result = fit_fe(&data, options)?;
        for dropped in &result.dropped_regressors {
            warn(format!("{response}: dropped collinear regressor `{dropped}`"));
        }
        ctx.write(&format!("fe_{}.csv", file_safe(response)), &result.to_csv())?;
        results.push(result);
    }
    ctx.write("fe_table.txt", &format_table(&results, &BTreeMap::new()))?;
    ctx.write_json(
        "fe.json",
        &json!({
            "standardized": !a.raw,
            "cluster": "entity",
            "standardization": scaling,
            "results": results,
        }),
    )
}

// --------------------------------------------------------------- diffusion

fn diffusion(a: &DiffusionArgs, ctx: &mut Context) -> Result<()> {
    ctx.input(&a.openings)?;
    if let Some(c) = &a.covariates {
        ctx.input(c)?;
    }
    let log = parse_openings(&a.openings, a.covariates.as_deref())?;
    let series = if a.annual {
        adoption_series_annual(&log)?
    } else {
        adoption_series(&log)?
    };
    let class = classify_curve(&series)?;
    ctx.write("series.csv", &series.to_csv())?;
    ctx.write("fits.csv", &class.to_csv())?;
    ctx.write_json(
        "diffusion.json",
        &json!({
            "annual": a.annual,
            "n_openings": log.len(),
            "classification": class,
        }),
    )?;

    let t_max = series.points().last().map_or(1.0, |p| p.0).max(1e-9);
    let curve = |model: Model, params: &[f64]| -> Vec<(f64, f64)> {
        (0..=200)
            .map(|i| {
                let t = t_max * i as f64 / 200.0;
                (t, model.eval(params, t))
            })
            .collect()
    };
    let chart = Chart {
        title: format!("Cumulative adoption ({:?}, ΔAIC {:.2})", class.class, class.delta_aic),
        x_label: "years since first opening".into(),
        y_label: "share adopted".into(),
        series: vec![
            Series::line("observed", series.points().to_vec()).with_style(Style::Points),
            Series::line("logistic", curve(Model::Logistic, &class.logistic.params)).with_style(Style::Dashed),
            Series::line("saturating", curve(Model::Saturating, &class.saturating.params))
                .with_style(Style::Dashed),
        ],
    };
    ctx.write("diffusion.svg", &svg::render(&chart))
}

fn cohorts(a: &CohortArgs, ctx: &mut Context) -> Result<()> {
    ctx.input(&a.openings)?;
    ctx.input(&a.covariates)?;
    let log = parse_openings(&a.openings, Some(&a.covariates))?;
    let names: Vec<String> = if a.names.is_empty() {
        let all: BTreeSet<&String> = log.records().iter().flat_map(|r| r.covariates.keys()).collect();
        all.into_iter().cloned().collect()
    } else {
        a.names.clone()
    };
    if log.regions_without_covariates() > 0 {
        warn(format!("{} openings have no covariate row", log.regions_without_covariates()));
    }
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let stats = cohort_summary(&log, &a.sizes, &names)?;
    ctx.write("cohorts.csv", &stats.to_csv())
}

// ----------------------------------------------------------------- defense

fn defense(a: &DefenseArgs, ctx: &mut Context) -> Result<()> {
    ctx.input(&a.taxonomy)?;
    ctx.input(&a.events)?;
    let taxonomy = parse_taxonomy(&a.taxonomy, !a.no_yelp_mode)?;
    let events = parse_events(&a.events, &taxonomy)?;
    let config = DefenseConfig {
        period: match a.period {
            PeriodArg::Month => PeriodLength::Month,
            PeriodArg::Quarter => PeriodLength::Quarter,
            PeriodArg::Year => PeriodLength::Year,
        },
        regular_min_events: a.regular_min_events,
        window: a.window,
        baseline_periods: a.baseline_periods,
        top_k: a.top_k,
        theta: a.theta,
        min_baseline_events: a.min_baseline_events,
        tension: match a.tension {
            TensionArg::Count => TensionMode::Count,
            TensionArg::Share => TensionMode::Share,
        },
        rollup_depth: a.rollup_depth,
    };
    let known = events.areas();
    let areas: Vec<String> = if a.areas.is_empty() {
        known.iter().map(|s| s.to_string()).collect()
    } else {
        if let Some(missing) = a.areas.iter().find(|x| !known.contains(x.as_str())) {
            return Err(DefenseError::UnknownArea(missing.clone()).into());
        }
        a.areas.clone()
    };

    let analyses: Vec<(String, Result<_, DefenseError>)> = areas
        .par_iter()
        .map(|area| {
            let outcome = build_series(&events, area, &taxonomy, &config).and_then(|(series, profile)| {
                let response = test_structural_response(&series, a.max_lag, a.permutations, a.seed)?;
                let proportional = test_significant_response(&series).ok();
                Ok((series, profile, response, proportional))
            });
            (area.clone(), outcome)
        })
        .collect();

    let mut report = Vec::new();
    let mut analyzed = 0;
    for (area, outcome) in analyses {
        match outcome {
            Ok((series, profile, response, proportional)) => {
                analyzed += 1;
                let diffs = series.len() - 1;
                if (a.max_lag as f64) / (diffs as f64) > 0.05 {
                    warn(format!(
                        "{area}: {diffs} differenced periods with max lag {}; permutation p-values over-reject \
                         (false-positive rate about {:.2} under independence)",
                        a.max_lag,
                        a.max_lag as f64 / diffs as f64
                    ));
                }
                let name = file_safe(&area);
                ctx.write(&format!("series_{name}.csv"), &series.to_csv())?;
                let x = |i: usize| (series.first_period + i as i64) as f64;
                let chart = Chart {
                    title: format!("{area}: tension and structure"),
                    x_label: format!("period index ({:?})", config.period).to_lowercase(),
                    y_label: "events".into(),
                    series: vec![
                        Series::line("tension", series.tension.iter().enumerate().map(|(i, v)| (x(i), *v)).collect()),
                        Series::line(
                            "structure",
                            series.structure.iter().enumerate().map(|(i, v)| (x(i), *v)).collect(),
                        ),
                    ],
                };
                ctx.write(&format!("defense_{name}.svg"), &svg::render(&chart))?;
                report.push(json!({
                    "area": area,
                    "first_period": series.period.label(series.first_period),
                    "n_periods": series.len(),
                    "profile": profile,
                    "response": response,
                    "proportional": proportional,
                }));
            }
            Err(e) => {
                warn(format!("{area}: {e}"));
                report.push(json!({ "area": area, "error": e.to_string() }));
            }
        }
    }
    ctx.write_json("defense.json", &json!({ "config": config, "areas": report }))?;
    if analyzed == 0 {
        return Err(CliError::Invalid("no area could be analyzed".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------- simulate

fn simulate_cmd(a: &SimulateArgs, ctx: &mut Context) -> Result<()> {
    match a.model {
        SimModel::Development => {
            let mut config = simulate::DevelopmentConfig::table1_signs(a.seed);
            if let Some(n) = a.n {
                config.n_entities = n;
            }
            let sim = simulate::gen_development_panel(&config)?;
            ctx.write("panel.csv", &sim.panel.to_csv())?;
            ctx.write_json("truth.json", &sim.truth)
        }
        SimModel::Differentiation => {
            let mut config = simulate::DifferentiationConfig {
                seed: a.seed,
                ..Default::default()
            };
            if let Some(n) = a.n {
                config.n_entities = n;
            }
            if let Some(g) = a.gain {
                config.gain = g;
            }
            let sim = simulate::gen_differentiation_panel(&config)?;
            ctx.write("panel.csv", &sim.panel.to_csv())?;
            ctx.write_json("truth.json", &sim.truth)
        }
        SimModel::Diffusion => {
            let shape = match a.shape {
                ShapeArg::S => simulate::ShapeConfig::default_s(),
                ShapeArg::C => simulate::ShapeConfig::default_c(),
                ShapeArg::Hybrid => simulate::ShapeConfig::default_hybrid(),
            };
            let mut config = simulate::DiffusionSimConfig::new(a.seed, a.n.unwrap_or(400), shape);
            config.covariates = true;
            let sim = simulate::gen_diffusion_series(&config)?;
            ctx.write("openings.csv", &sim.openings.to_openings_csv())?;
            ctx.write("covariates.csv", &sim.openings.to_covariates_csv())?;
            ctx.write_json("truth.json", &sim.truth)
        }
        SimModel::Defense => {
            let mut config = simulate::DefenseSimConfig {
                seed: a.seed,
                ..Default::default()
            };
            if let Some(n) = a.n {
                config.n_areas = n;
            }
            if let Some(g) = a.gain {
                config.gain = g;
            }
            let sim = simulate::gen_defense_events(&config)?;
            ctx.write("events.csv", &sim.events.to_csv())?;
            ctx.write("taxonomy.csv", &sim.taxonomy.to_csv())?;
            ctx.write_json("truth.json", &sim.truth)
        }
        SimModel::Specialization => {
            let mut config = simulate::SpecializationSimConfig {
                seed: a.seed,
                ..Default::default()
            };
            if let Some(n) = a.n {
                config.areas_per_group = n;
            }
            let sim = simulate::gen_specialization_events(&config)?;
            ctx.write("events.csv", &sim.events.to_csv())?;
            ctx.write("taxonomy.csv", &sim.taxonomy.to_csv())?;
            ctx.write_json(
                "truth.json",
                &json!({ "config": sim.truth, "depth_by_year": sim.depth_by_year }),
            )
        }
        SimModel::Amenity => {
            let mut config = simulate::AmenitySimConfig {
                seed: a.seed,
                ..Default::default()
            };
            if let Some(n) = a.n {
                config.areas_per_city = n;
            }
            let sim = simulate::gen_amenity_panel(&config)?;
            ctx.write("amenities.csv", &sim.panel.to_csv())?;
            ctx.write("weights.csv", &sim.weights.to_csv())?;
            ctx.write_json("truth.json", &sim.truth)
        }
    }
}

// ---------------------------------------------------------------- selftest

/// One embedded check: name, passed, detail.
type Check = (&'static str, bool, String);

fn selftest(ctx: &mut Context) -> Result<()> {
    let checks = vec![worked_example(), depth_anchors(), lsdv_check()];
    let mut report = String::new();
    for (name, ok, detail) in &checks {
        let line = format!("{} {name}: {detail}\n", if *ok { "PASS" } else { "FAIL" });
        print!("{line}");
        report.push_str(&line);
    }
    ctx.write("selftest.txt", &report)?;
    if checks.iter().all(|c| c.1) {
        Ok(())
    } else {
        Err(CliError::SelftestFailed)
    }
}

/// Tract A lists five root categories, tract B one depth-3 and one depth-2
/// category: indices 1 and 2.5.
fn worked_example() -> Check {
    let taxonomy = Taxonomy::from_edges(
        [
            ("food", None),
            ("shopping", None),
            ("nightlife", None),
            ("arts", None),
            ("services", None),
            ("restaurants", Some("food")),
            ("sushi", Some("restaurants")),
            ("bars", Some("nightlife")),
        ],
        true,
    )
    .expect("static taxonomy");
    let weights = depth_weights(&taxonomy);
    let a = specialization_index(["food", "shopping", "nightlife", "arts", "services"], &weights);
    let b = specialization_index(["sushi", "bars"], &weights);
    let ok = matches!((&a, &b), (Ok((x, 5)), Ok((y, 2))) if *x == 1.0 && *y == 2.5);
    ("specialization worked example", ok, format!("tract A {a:?}, tract B {b:?}"))
}

fn depth_anchors() -> Check {
    let taxonomy = Taxonomy::from_edges([("food", None), ("restaurants", Some("food"))], true).expect("static taxonomy");
    let weights = depth_weights(&taxonomy);
    let (root, child) = (weights.get("food"), weights.get("restaurants"));
    (
        "depth-weight anchors",
        root == Some(1) && child == Some(2),
        format!("root {root:?}, depth-2 {child:?}"),
    )
}

/// Within estimator against dummy-variable OLS on a small fixed panel.
fn lsdv_check() -> Check {
    #[rustfmt::skip]
    const ROWS: [(&str, i32, f64, f64, f64); 10] = [
        ("a", 1, 1.0, 0.5, 2.0), ("a", 2, 2.5, 1.5, 1.0), ("a", 3, 2.0, 2.5, 3.5),
        ("b", 1, 4.0, 1.0, 0.5), ("b", 2, 5.5, 3.0, 1.5),
        ("c", 1, 0.5, -1.0, 2.5), ("c", 2, 1.0, 0.0, 0.0), ("c", 3, 3.0, 1.0, 1.0),
        ("d", 1, 2.0, 2.0, 2.0), ("d", 3, 1.5, 2.5, 4.5),
    ];
    let names = vec!["x1".to_string(), "x2".to_string()];
    let rows = ROWS
        .iter()
        .map(|(e, p, y, x1, x2)| crate::panel_fe::PanelRow {
            entity_id: e.to_string(),
            period: *p,
            response: *y,
            regressors: vec![*x1, *x2],
        })
        .collect();
    let data = match PanelDataset::new("y", names, rows) {
        Ok(d) => d,
        Err(e) => return ("LSDV oracle", false, e.to_string()),
    };
    let fit = match fit_fe(&data, FeOptions::default()) {
        Ok(f) => f,
        Err(e) => return ("LSDV oracle", false, e.to_string()),
    };
    // [x1, x2, entity dummies a..d]
    let entities = ["a", "b", "c", "d"];
    let x = DMatrix::from_fn(ROWS.len(), 6, |i, j| match j {
        0 => ROWS[i].3,
        1 => ROWS[i].4,
        _ => f64::from(u8::from(ROWS[i].0 == entities[j - 2])),
    });
    let y = DVector::from_iterator(ROWS.len(), ROWS.iter().map(|r| r.2));
    let xtx = x.transpose() * &x;
    let beta = xtx.lu().solve(&(x.transpose() * y)).expect("full-rank design");
    let diff = fit
        .coefficients
        .iter()
        .zip(beta.iter())
        .map(|(c, b)| (c.estimate - b).abs())
        .fold(0.0, f64::max);
    (
        "LSDV oracle",
        diff <= 1e-8,
        format!("max |within − LSDV| = {diff:.2e}"),
    )
}
