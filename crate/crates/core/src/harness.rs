//! Experiment orchestration: configuration, single runs, parameter sweeps
//! and the CSV / JSON artifacts they produce.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{build_kernel, fmt_sci, CorrelatorKernel};
use crate::error::{Error, Result};
use crate::exact::{exact_average_otoc_with, haar_average_otoc_mc_series, ChainEvolution, OtocSeries};
use crate::params::{BathMode, ChainParams, CorrelatorMode, StateSource, MAX_SITES};
use crate::redfield::{empirical_rate, qsl_bounds, BoundSeries};

pub const VERSION: &str = concat!("otoc-qsl ", env!("CARGO_PKG_VERSION"));

/// Exact OTOC values may not fall below this.
pub const PURITY_FLOOR: f64 = 0.5 - 1e-10;

pub const SERIES_HEADER: &str = "t,Jt,otoc_exact,otoc_redfield,bound_liouville,bound_state_direct,\
bound_state_relaxed,rate_exact,rate_liouville,rate_state,threshold";

pub const SWEEP_HEADER: &str = "value,min_otoc,argmin_t,bound_liouville_end,bound_state_direct_end,\
bound_state_relaxed_end,max_gap";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "g")]
    G,
    #[serde(rename = "J")]
    J,
    #[serde(rename = "N")]
    N,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(Self::G),
            "J" | "j" => Ok(Self::J),
            "N" | "n" => Ok(Self::N),
            other => Err(Error::config("sweep.param", format!("expected g, J or N, got `{other}`"))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::G => "g",
            Self::J => "J",
            Self::N => "N",
        }
    }

    /// `params` with this parameter set to `value`.
    pub fn apply(self, params: &ChainParams, value: f64) -> Result<ChainParams> {
        let mut p = params.clone();
        match self {
            Self::G => p.g = value,
            Self::J => p.j = value,
            Self::N => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::config("sweep.values", format!("N must be an integer, got {value}")));
                }
                if value as usize > MAX_SITES {
                    return Err(Error::config("sweep.values", format!("N = {value} exceeds {MAX_SITES}")));
                }
                p.n = value as usize;
            }
        }
        p.validate().map_err(|e| match e {
            Error::Config { field, message } => {
                Error::config("sweep.values", format!("{}={value}: {field}: {message}", self.label()))
            }
            other => other,
        })?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtocSource {
    Exact,
    Redfield,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaarCheck {
    pub n_samples: usize,
    /// Physical times.
    pub times: Vec<f64>,
}

fn default_source() -> OtocSource {
    OtocSource::Both
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_window_end() -> f64 {
    1.2
}
fn default_fit_window() -> [f64; 2] {
    [0.0, 0.5]
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub params: ChainParams,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_source")]
    pub otoc_source: OtocSource,
    #[serde(default)]
    pub haar_check: Option<HaarCheck>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Analysis window end in units of `Jt`.
    #[serde(default = "default_window_end")]
    pub window_end: f64,
    /// `Jt` range for the empirical rate fit.
    #[serde(default = "default_fit_window")]
    pub fit_window: [f64; 2],
    /// Treat bound-ordering violations as errors (exit code 3).
    #[serde(default = "default_true")]
    pub strict_invariants: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.window_end.is_finite() && self.window_end > 0.0) {
            return Err(Error::config("window_end", "must be positive"));
        }
        let [a, b] = self.fit_window;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::config("fit_window", "expected [start, end] with start < end"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values", "empty list"));
            }
            for &v in &sweep.values {
                sweep.param.apply(&self.params, v)?;
            }
        }
        if let Some(h) = &self.haar_check {
            if h.n_samples < 2 {
                return Err(Error::config("haar_check.n_samples", "need at least two samples"));
            }
            if h.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(Error::config("haar_check.times", "times must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Timescales {
    pub tau_system: f64,
    pub tau_interaction: f64,
    /// First time `|Γ|` drops below `1/e`; `None` if it never does on the grid.
    pub tau_bath: Option<f64>,
    /// First time `|Γ|` drops below 0.5.
    pub tau_half: Option<f64>,
    /// `τ_B < τ_I < τ_A`.
    pub hierarchy_ok: bool,
}

impl Timescales {
    pub fn measure(params: &ChainParams, kernel: &CorrelatorKernel) -> Self {
        let tau_system = params.tau_system();
        let tau_interaction = params.tau_interaction();
        let tau_bath = kernel.decay_time((-1.0f64).exp());
        let hierarchy_ok = tau_bath.is_some_and(|b| b < tau_interaction) && tau_interaction < tau_system;
        Self {
            tau_system,
            tau_interaction,
            tau_bath,
            tau_half: kernel.decay_time(0.5),
            hierarchy_ok,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HaarReport {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub exact: f64,
    pub z_score: f64,
}

/// Everything computed for one parameter point.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub params: ChainParams,
    pub series: BoundSeries,
    pub timescales: Timescales,
    pub min_otoc: Option<(f64, f64)>,
    pub empirical_rate: Option<f64>,
    pub haar: Vec<HaarReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunArtifacts {
    pub series_csv: Vec<PathBuf>,
    pub sweep_csv: Option<PathBuf>,
    pub meta_json: PathBuf,
}

/// Minimum of the OTOC over `J t ≤ window_end` and its first location.
pub fn min_otoc_window(series: &OtocSeries, j: f64, window_end: f64) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (n, &v) in series.otoc.iter().enumerate() {
        let t = series.grid.t(n);
        if j * t > window_end * (1.0 + 1e-12) {
            break;
        }
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, t));
        }
    }
    best.ok_or_else(|| Error::domain(format!("no grid points with Jt ≤ {window_end}")))
}

/// Index of the first strict local minimum, for exploring revival windows.
pub fn first_local_minimum(values: &[f64]) -> Option<usize> {
    (1..values.len().saturating_sub(1)).find(|&n| values[n] < values[n - 1] && values[n] <= values[n + 1])
}

/// Last grid index with `J t ≤ window_end`.
fn window_last(grid: &crate::grid::TimeGrid, j: f64, window_end: f64) -> usize {
    (0..grid.len())
        .take_while(|&n| j * grid.t(n) <= window_end * (1.0 + 1e-12))
        .last()
        .unwrap_or(0)
}

fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Full pipeline for one parameter point: exact OTOC, kernel, Redfield,
/// bounds and rates.
pub fn simulate(params: &ChainParams, config: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    params.validate()?;
    let grid = params.grid()?;
    let want_exact = config.otoc_source != OtocSource::Redfield;
    let need_evo = want_exact
        || params.state_source == StateSource::Exact
        || (params.bath_mode == BathMode::Nonstationary && params.correlator_mode == CorrelatorMode::Numeric)
        || config.haar_check.is_some();
    let evo = if need_evo { Some(ChainEvolution::new(params)?) } else { None };
    let exact = match (&evo, want_exact) {
        (Some(e), true) => Some(exact_average_otoc_with(e, &grid)?),
        _ => None,
    };
    if let Some(ex) = &exact {
        if let Some((n, v)) = ex.otoc.iter().enumerate().find(|(_, v)| **v < PURITY_FLOOR) {
            return Err(Error::numerical(format!(
                "exact OTOC {v} below the maximally mixed value at t = {}",
                grid.t(n)
            )));
        }
    }
    let kernel = build_kernel(params, &grid, evo.as_ref())?;
    if params.correlator_mode == CorrelatorMode::Numeric {
        kernel.check_invariants(crate::bath::KERNEL_TOL)?;
    }
    let timescales = Timescales::measure(params, &kernel);
    if !timescales.hierarchy_ok {
        warn!(
            "timescale hierarchy τ_B ≪ τ_I ≪ τ_A fails: τ_B = {:?}, τ_I = {}, τ_A = {}",
            timescales.tau_bath, timescales.tau_interaction, timescales.tau_system
        );
    }
    let otoc_exact = exact.as_ref().map_or_else(|| vec![f64::NAN; grid.len()], |e| e.otoc.clone());
    let series = qsl_bounds(params, &kernel, &grid, &otoc_exact, evo.as_ref())?;
    let min_otoc = exact
        .as_ref()
        .map(|e| min_otoc_window(e, params.j, config.window_end))
        .transpose()?;
    let empirical = if exact.is_some() && params.j > 0.0 {
        let [a, b] = config.fit_window;
        empirical_rate(&series, a / params.j, b / params.j).ok()
    } else {
        None
    };
    let haar = match (&config.haar_check, &evo) {
        (Some(h), Some(e)) => haar_reports(params, e, h, seed)?,
        _ => Vec::new(),
    };
    Ok(RunOutcome {
        params: params.clone(),
        series,
        timescales,
        min_otoc,
        empirical_rate: empirical,
        haar,
    })
}

fn haar_reports(params: &ChainParams, evo: &ChainEvolution, check: &HaarCheck, seed: u64) -> Result<Vec<HaarReport>> {
    let est = haar_average_otoc_mc_series(params, &check.times, check.n_samples, seed)?;
    Ok(est
        .into_iter()
        .map(|e| {
            let exact = evo.reduced_system(e.t).purity();
            let diff = e.estimate - exact;
            let z_score = if e.stderr > 0.0 {
                diff / e.stderr
            } else if diff.abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            HaarReport {
                t: e.t,
                estimate: e.estimate,
                stderr: e.stderr,
                exact,
                z_score,
            }
        })
        .collect())
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        fmt_sci(x)
    }
}

/// Writes the per-time series; rows are `\n`-terminated.
pub fn write_series_csv(series: &BoundSeries, j: f64, mut w: impl Write) -> Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for n in 0..series.len() {
        let t = series.grid.t(n);
        let row = [
            t,
            j * t,
            series.otoc_exact[n],
            series.otoc_redfield[n],
            series.bound_liouville[n],
            series.bound_state_direct[n],
            series.bound_state_relaxed[n],
            series.rate_exact[n],
            series.rate_liouville[n],
            series.rate_state[n],
            0.5,
        ];
        let cells: Vec<String> = row.iter().map(|&x| fmt_value(x)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub min_otoc: f64,
    pub argmin_t: f64,
    pub bound_liouville_end: f64,
    pub bound_state_direct_end: f64,
    pub bound_state_relaxed_end: f64,
    /// Largest `otoc_exact - bound_liouville` over the window.
    pub max_gap: f64,
}

impl SweepRow {
    pub fn from_outcome(value: f64, outcome: &RunOutcome, window_end: f64) -> Self {
        let s = &outcome.series;
        let last = window_last(&s.grid, outcome.params.j, window_end);
        let max_gap = (0..=last)
            .map(|n| s.otoc_exact[n] - s.bound_liouville[n])
            .fold(f64::NAN, f64::max);
        let (min_otoc, argmin_t) = outcome.min_otoc.unwrap_or((f64::NAN, f64::NAN));
        Self {
            value,
            min_otoc,
            argmin_t,
            bound_liouville_end: s.bound_liouville[last],
            bound_state_direct_end: s.bound_state_direct[last],
            bound_state_relaxed_end: s.bound_state_relaxed[last],
            max_gap,
        }
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        let cells = [
            r.value,
            r.min_otoc,
            r.argmin_t,
            r.bound_liouville_end,
            r.bound_state_direct_end,
            r.bound_state_relaxed_end,
            r.max_gap,
        ]
        .map(fmt_value);
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PointMeta<'a> {
    params: &'a ChainParams,
    timescales: &'a Timescales,
    hierarchy_ok: bool,
    min_otoc: Option<f64>,
    argmin_t: Option<f64>,
    empirical_rate: Option<f64>,
    ordering_violations: usize,
    clamped_points: usize,
    haar_check: &'a [HaarReport],
    haar_max_abs_z: Option<f64>,
}

impl<'a> PointMeta<'a> {
    fn new(o: &'a RunOutcome) -> Self {
        Self {
            params: &o.params,
            timescales: &o.timescales,
            hierarchy_ok: o.timescales.hierarchy_ok,
            min_otoc: o.min_otoc.map(|m| m.0),
            argmin_t: o.min_otoc.map(|m| m.1),
            empirical_rate: o.empirical_rate,
            ordering_violations: o.series.ordering_violations().len(),
            clamped_points: o.series.clamped.len(),
            haar_check: &o.haar,
            haar_max_abs_z: o.haar.iter().map(|h| h.z_score.abs()).reduce(f64::max),
        }
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    version: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    /// Timescales of the first point, repeated at top level.
    timescales: &'a Timescales,
    hierarchy_ok: bool,
    points: Vec<PointMeta<'a>>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_meta(path: &Path, config: &ExperimentConfig, seed: u64, outcomes: &[RunOutcome]) -> Result<()> {
    let first = outcomes.first().ok_or_else(|| Error::domain("no outcomes to describe"))?;
    let meta = Meta {
        version: VERSION,
        seed,
        config,
        timescales: &first.timescales,
        hierarchy_ok: outcomes.iter().all(|o| o.timescales.hierarchy_ok),
        points: outcomes.iter().map(PointMeta::new).collect(),
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn check_ordering(outcome: &RunOutcome, strict: bool) -> Result<()> {
    let bad = outcome.series.ordering_violations();
    if bad.is_empty() {
        return Ok(());
    }
    let n = bad[0];
    let s = &outcome.series;
    let msg = format!(
        "bound ordering 1 ≥ liouville ≥ direct ≥ relaxed violated at {} grid points (first t = {}: {} / {} / {})",
        bad.len(),
        s.grid.t(n),
        s.bound_liouville[n],
        s.bound_state_direct[n],
        s.bound_state_relaxed[n]
    );
    if strict {
        Err(Error::numerical(msg))
    } else {
        warn!("{msg}");
        Ok(())
    }
}

fn write_outcome_series(path: &Path, outcome: &RunOutcome) -> Result<()> {
    let mut w = create(path)?;
    write_series_csv(&outcome.series, outcome.params.j, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Single run; writes `series.csv` and `meta.json` into `output_dir`.
/// Invariant violations are reported after the files are written.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunArtifacts> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    let outcome = simulate(&config.params, config, seed)?;
    let series_csv = config.output_dir.join("series.csv");
    let meta_json = config.output_dir.join("meta.json");
    write_outcome_series(&series_csv, &outcome)?;
    write_meta(&meta_json, config, seed, std::slice::from_ref(&outcome))?;
    info!("wrote {}", series_csv.display());
    check_ordering(&outcome, config.strict_invariants)?;
    Ok(RunArtifacts {
        series_csv: vec![series_csv],
        sweep_csv: None,
        meta_json,
    })
}

/// Runs every sweep point in parallel, each with its own seed stream.
pub fn sweep_outcomes(config: &ExperimentConfig, seed: u64) -> Result<Vec<(f64, RunOutcome)>> {
    config.validate()?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "no sweep specified"))?;
    sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let p = sweep.param.apply(&config.params, v)?;
            simulate(&p, config, derive_seed(seed, i as u64)).map(|o| (v, o))
        })
        .collect()
}

/// Sweep run; writes `sweep.csv`, one `series_<param>_<index>.csv` per
/// value, and `meta.json`.
pub fn run_sweep(config: &ExperimentConfig, seed: u64) -> Result<RunArtifacts> {
    let outcomes = sweep_outcomes(config, seed)?;
    let sweep = config.sweep.as_ref().expect("validated by sweep_outcomes");
    fs::create_dir_all(&config.output_dir)?;
    let mut series_csv = Vec::new();
    let mut rows = Vec::new();
    for (i, (v, o)) in outcomes.iter().enumerate() {
        let path = config.output_dir.join(format!("series_{}_{i}.csv", sweep.param.label()));
        write_outcome_series(&path, o)?;
        series_csv.push(path);
        rows.push(SweepRow::from_outcome(*v, o, config.window_end));
    }
    let sweep_path = config.output_dir.join("sweep.csv");
    let mut w = create(&sweep_path)?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    let meta_json = config.output_dir.join("meta.json");
    let plain: Vec<RunOutcome> = outcomes.into_iter().map(|(_, o)| o).collect();
    write_meta(&meta_json, config, seed, &plain)?;
    for o in &plain {
        check_ordering(o, config.strict_invariants)?;
    }
    Ok(RunArtifacts {
        series_csv,
        sweep_csv: Some(sweep_path),
        meta_json,
    })
}

/// Writes `t,estimate,stderr,exact,z_score` rows for a Haar check.
pub fn write_haar_csv(reports: &[HaarReport], mut w: impl Write) -> Result<()> {
    writeln!(w, "t,estimate,stderr,exact,z_score")?;
    for r in reports {
        let cells = [r.t, r.estimate, r.stderr, r.exact, r.z_score].map(fmt_value);
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Haar Monte Carlo against the exact purity at the requested times.
pub fn run_haar_check(params: &ChainParams, check: &HaarCheck, seed: u64) -> Result<Vec<HaarReport>> {
    params.validate()?;
    let evo = ChainEvolution::new(params)?;
    haar_reports(params, &evo, check, seed)
}
