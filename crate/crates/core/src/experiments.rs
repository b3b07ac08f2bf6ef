//! Parameter sweeps, the verification suite and plot output.
//!
//! A sweep walks a box of `(a₁, a₂, β)` values given in units of `a*`,
//! classifies each cell and runs the constrained flow on it. Cells are
//! independent and run on a bounded worker pool. Each finished row is
//! appended to `journal.jsonl` in the output directory and synced before the
//! next one is taken, so an interrupted sweep resumes by skipping journaled
//! cells. The final table is `sweep.csv` (cell order, 17 significant digits).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constrained::{initial_pair, minimize, ConstrainedError, SystemParams};
use crate::ground_state::{gn_quotient, solve_q_with, GroundState, GroundStateMethod, PohozaevReport};
use crate::io::{ground_state_for, IoError};
use crate::potential::{PotentialSpec, DEFAULT_EDGE_MIN};
use crate::spectral::{Grid1D, Multiplier, SpectralError};
use crate::thresholds::{
    classify, coupled_soliton, compute_thresholds, critical_energy, decide, divergence_probe, gamma_estimate,
    gamma_for_rules, kappa, kappa_inf, psi_r_fit, ClassifyOptions, GammaMethod, RuleInputs, ThresholdError,
    Verdict, DEFAULT_GAMMA_BAND,
};
use crate::SolverOptions;

/// Default limit on the number of cells in one sweep.
pub const DEFAULT_BUDGET: usize = 10_000;

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const TABLE_FILE: &str = "sweep.csv";
pub const CONFIG_FILE: &str = "sweep.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("sweep has {cells} cells, budget is {budget}")]
    BudgetExceeded { cells: usize, budget: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("journal in {0} belongs to a different sweep")]
    JournalMismatch(PathBuf),
    #[error("table is empty")]
    EmptyTable,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Field(#[from] IoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Constrained(#[from] ConstrainedError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

// ---------------------------------------------------------------------------
// Configuration

fn default_multiplier() -> Multiplier {
    Multiplier::LineCorrected
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default = "default_multiplier")]
    pub multiplier: Multiplier,
}

impl GridConfig {
    pub fn grid(&self) -> Result<Grid1D, SpectralError> {
        Grid1D::with_multiplier(self.n, self.l, self.multiplier)
    }
}

/// `steps` evenly spaced values from `min` to `max` (just `min` when `steps = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        (0..self.steps)
            .map(|k| self.min + (self.max - self.min) * k as f64 / (self.steps - 1) as f64)
            .collect()
    }

    fn validate(&self, name: &str) -> Result<(), ExperimentError> {
        if self.steps == 0 || !self.min.is_finite() || !self.max.is_finite() || self.max < self.min {
            return Err(ExperimentError::Config(format!(
                "range `{name}` needs finite min <= max and steps >= 1"
            )));
        }
        Ok(())
    }
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

fn default_band() -> f64 {
    DEFAULT_GAMMA_BAND
}

fn default_edge_min() -> f64 {
    DEFAULT_EDGE_MIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Ranges in units of `a*`.
    pub a1: Range,
    pub a2: Range,
    pub beta: Range,
    /// Seeds random perturbations of the initial flow data; unperturbed if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_band")]
    pub gamma_band: f64,
    #[serde(default = "default_edge_min")]
    pub edge_min: f64,
}

/// The sweep configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    pub potential1: PotentialSpec,
    pub potential2: PotentialSpec,
    pub sweep: SweepSection,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.grid.grid()?;
        self.sweep.a1.validate("a1")?;
        self.sweep.a2.validate("a2")?;
        self.sweep.beta.validate("beta")?;
        if !(self.sweep.gamma_band >= 0.0) {
            return Err(ExperimentError::Config("gamma_band must be >= 0".into()));
        }
        self.potential1.validate().map_err(ConstrainedError::from)?;
        self.potential2.validate().map_err(ConstrainedError::from)?;
        let cells = self.cell_count();
        if cells > self.sweep.budget {
            return Err(ExperimentError::BudgetExceeded {
                cells,
                budget: self.sweep.budget,
            });
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        let s = &self.sweep;
        s.a1.steps.saturating_mul(s.a2.steps).saturating_mul(s.beta.steps)
    }

    /// Cell coordinates in units of `a*`, `β` fastest.
    pub fn cells(&self) -> Vec<[f64; 3]> {
        let s = &self.sweep;
        let mut out = Vec::with_capacity(self.cell_count());
        for a1 in s.a1.values() {
            for a2 in s.a2.values() {
                for b in s.beta.values() {
                    out.push([a1, a2, b]);
                }
            }
        }
        out
    }
}

/// A configured sweep bound to an output directory.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub config: SweepConfig,
    pub out_dir: PathBuf,
    pub resume: bool,
    /// Worker threads; `None` means the available parallelism.
    pub workers: Option<usize>,
}

// ---------------------------------------------------------------------------
// Rows and tables

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    pub a1: f64,
    pub a2: f64,
    pub beta: f64,
    pub a_star: f64,
    pub beta_lower: Option<f64>,
    pub beta_upper: f64,
    pub gamma_value: Option<f64>,
    pub gamma_lo: Option<f64>,
    pub gamma_hi: Option<f64>,
    pub gamma_method: Option<GammaMethod>,
    pub verdict: Verdict,
    pub rule: String,
    pub energy: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub el_residual: f64,
    /// `+`-separated tags (`collapse-to-grid`, `energy-floor`, `energy-drop`, `psi-r`); empty if none.
    pub diverged_evidence: String,
    pub v_floor: Option<f64>,
    pub e_hat: Option<f64>,
}

const HEADER: [&str; 22] = [
    "cell",
    "a1",
    "a2",
    "beta",
    "a_star",
    "beta_lower",
    "beta_upper",
    "gamma_value",
    "gamma_lo",
    "gamma_hi",
    "gamma_method",
    "verdict",
    "rule",
    "energy",
    "mu1",
    "mu2",
    "iterations",
    "converged",
    "el_residual",
    "diverged_evidence",
    "v_floor",
    "e_hat",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.cell.to_string(),
            num(self.a1),
            num(self.a2),
            num(self.beta),
            num(self.a_star),
            opt(self.beta_lower),
            num(self.beta_upper),
            opt(self.gamma_value),
            opt(self.gamma_lo),
            opt(self.gamma_hi),
            match self.gamma_method {
                Some(GammaMethod::Numeric) => "numeric".into(),
                Some(GammaMethod::BoundsOnly) => "bounds_only".into(),
                None => String::new(),
            },
            self.verdict.to_string(),
            self.rule.clone(),
            num(self.energy),
            num(self.mu1),
            num(self.mu2),
            self.iterations.to_string(),
            self.converged.to_string(),
            num(self.el_residual),
            self.diverged_evidence.clone(),
            opt(self.v_floor),
            opt(self.e_hat),
        ]
    }

    /// The verdict implied by this row's own columns.
    pub fn rederive(&self, gamma_band: f64) -> (Verdict, &'static str) {
        let gamma = match (self.gamma_method, self.gamma_value, self.gamma_lo, self.gamma_hi) {
            (Some(m), Some(v), Some(lo), Some(hi)) => gamma_for_rules(m, v, lo, hi, gamma_band),
            _ => None,
        };
        decide(&RuleInputs {
            a1: self.a1,
            a2: self.a2,
            beta: self.beta,
            a_star: self.a_star,
            gamma,
            v_floor: self.v_floor,
            e_hat: self.e_hat,
            gamma_band,
        })
    }

    pub fn has_divergence_evidence(&self) -> bool {
        !self.diverged_evidence.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// RFC-4180 CSV with a header row.
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for r in &self.rows {
            w.write_record(r.record())?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self, ExperimentError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<Result<Vec<SweepRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn read(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_csv(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), ExperimentError> {
        write_atomic(path, self.to_csv()?.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sweeps

/// Classifies one cell and runs the flow on it.
pub fn compute_row(
    config: &SweepConfig,
    grid: &Grid1D,
    gs: &GroundState,
    cell: usize,
    units: [f64; 3],
) -> Result<SweepRow, ExperimentError> {
    let a_star = gs.a_star;
    let [a1, a2, beta] = units.map(|u| u * a_star);
    let params = SystemParams::new(a1, a2, beta, config.potential1.clone(), config.potential2.clone())?
        .with_edge_min(config.sweep.edge_min);
    let solver = &config.solver;
    let copts = ClassifyOptions {
        gamma_band: config.sweep.gamma_band,
        always_gamma: true,
    };
    let class = classify(&params, gs, grid, solver, &copts)?;
    let init = match config.sweep.seed {
        Some(s) => Some(initial_pair(&params, grid, Some(s.wrapping_add(cell as u64)))?),
        None => None,
    };
    let flow = match minimize(&params, grid, solver, init) {
        Ok(r) => r,
        Err(ConstrainedError::DivergingEnergy(r)) | Err(ConstrainedError::NoConvergence(r)) => *r,
        Err(e) => return Err(e.into()),
    };
    let mut tags = Vec::new();
    if let Some(ev) = &flow.diverged_evidence {
        tags.push(serde_json::to_value(ev.reason)?.as_str().unwrap_or_default().to_string());
    }
    if let Some(trace) = divergence_probe(&params, grid, gs)? {
        if trace.diverges() {
            tags.push("psi-r".to_string());
        }
    }
    let th = compute_thresholds(a1, a2, a_star);
    let g = class.gamma.as_ref();
    Ok(SweepRow {
        cell,
        a1,
        a2,
        beta,
        a_star,
        beta_lower: th.beta_lower,
        beta_upper: th.beta_upper,
        gamma_value: g.map(|g| g.value),
        gamma_lo: g.map(|g| g.lower_bound),
        gamma_hi: g.map(|g| g.upper_bound),
        gamma_method: g.map(|g| g.method),
        verdict: class.verdict,
        rule: class.rule,
        energy: flow.energy,
        mu1: flow.mu1,
        mu2: flow.mu2,
        iterations: flow.iterations,
        converged: flow.converged,
        el_residual: flow.el_residual,
        diverged_evidence: tags.join("+"),
        v_floor: class.critical.as_ref().map(|c| c.floor),
        e_hat: class.critical.as_ref().map(|c| c.estimate),
    })
}

#[derive(Serialize, Deserialize)]
struct JournalEntry {
    cell: usize,
    row: SweepRow,
}

/// Reads complete journal lines, truncating a torn final line.
fn read_journal(path: &Path) -> Result<BTreeMap<usize, SweepRow>, ExperimentError> {
    let mut rows = BTreeMap::new();
    let Ok(file) = File::open(path) else {
        return Ok(rows);
    };
    let mut reader = BufReader::new(file);
    let mut good = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 || !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<JournalEntry>(&line) {
            Ok(e) => {
                rows.insert(e.cell, e.row);
                good += read as u64;
            }
            Err(_) => break,
        }
    }
    let f = OpenOptions::new().write(true).open(path)?;
    if f.metadata()?.len() != good {
        f.set_len(good)?;
        f.sync_all()?;
    }
    Ok(rows)
}

#[derive(Serialize)]
struct Manifest<'a> {
    a_star: f64,
    cells: usize,
    computed: usize,
    resumed: usize,
    workers: usize,
    started_unix: u64,
    finished_unix: u64,
    elapsed_seconds: f64,
    ground_state_residual: f64,
    config: &'a SweepConfig,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs (or resumes) a sweep and writes `sweep.csv` into the output directory.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, ExperimentError> {
    run_sweep_limited(spec, None)
}

/// Like [`run_sweep`] but stops after computing `limit` new cells (without
/// writing the table when cells remain); used to exercise resumption.
pub fn run_sweep_limited(spec: &SweepSpec, limit: Option<usize>) -> Result<SweepTable, ExperimentError> {
    let config = &spec.config;
    config.validate()?;
    let started = unix_now();
    let clock = Instant::now();
    let grid = config.grid.grid()?;
    let gs = ground_state_for(&grid, &config.solver)?;

    fs::create_dir_all(&spec.out_dir)?;
    let config_path = spec.out_dir.join(CONFIG_FILE);
    let journal_path = spec.out_dir.join(JOURNAL_FILE);
    let text = config.to_toml();
    let done = if spec.resume && journal_path.exists() {
        match fs::read_to_string(&config_path) {
            Ok(saved) if SweepConfig::from_toml(&saved).ok().as_ref() == Some(config) => read_journal(&journal_path)?,
            _ => return Err(ExperimentError::JournalMismatch(spec.out_dir.clone())),
        }
    } else {
        File::create(&journal_path)?.sync_all()?;
        BTreeMap::new()
    };
    write_atomic(&config_path, text.as_bytes())?;

    let cells = config.cells();
    let mut pending: Vec<usize> = (0..cells.len()).filter(|c| !done.contains_key(c)).collect();
    if let Some(l) = limit {
        pending.truncate(l);
    }
    let workers = spec
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, pending.len().max(1));

    let mut journal = OpenOptions::new().append(true).open(&journal_path)?;
    journal.seek(SeekFrom::End(0))?;
    let journal = Mutex::new(journal);
    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<usize, SweepRow>> = Mutex::new(BTreeMap::new());
    let failure: Mutex<Option<ExperimentError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failure.lock().expect("lock").is_some() {
                    return;
                }
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&cell) = pending.get(k) else {
                    return;
                };
                let outcome = compute_row(config, &grid, &gs, cell, cells[cell]).and_then(|row| {
                    let mut line = serde_json::to_string(&JournalEntry { cell, row: row.clone() })?;
                    line.push('\n');
                    let mut j = journal.lock().expect("lock");
                    j.write_all(line.as_bytes())?;
                    j.sync_data()?;
                    Ok(row)
                });
                match outcome {
                    Ok(row) => {
                        results.lock().expect("lock").insert(cell, row);
                    }
                    Err(e) => {
                        failure.lock().expect("lock").get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("lock") {
        return Err(e);
    }
    let computed = results.lock().expect("lock").len();
    let mut all = done;
    let resumed = all.len();
    all.extend(results.into_inner().expect("lock"));
    let table = SweepTable {
        rows: all.into_values().collect(),
    };
    if table.rows.len() == cells.len() {
        table.write(&spec.out_dir.join(TABLE_FILE))?;
        let manifest = Manifest {
            a_star: gs.a_star,
            cells: cells.len(),
            computed,
            resumed,
            workers,
            started_unix: started,
            finished_unix: unix_now(),
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            ground_state_residual: gs.residual,
            config,
        };
        write_atomic(
            &spec.out_dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Verification suite

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteLevel {
    Fast,
    Full,
}

impl SuiteLevel {
    /// Grid points of the soliton grid; the box half-length is `n/16`.
    pub fn n(self) -> usize {
        match self {
            SuiteLevel::Fast => 1024,
            SuiteLevel::Full => 4096,
        }
    }
}

impl FromStr for SuiteLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(SuiteLevel::Fast),
            "full" => Ok(SuiteLevel::Full),
            other => Err(format!("unknown level `{other}` (expected fast|full)")),
        }
    }
}

impl fmt::Display for SuiteLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteLevel::Fast => "fast",
            SuiteLevel::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub level: SuiteLevel,
    pub n: usize,
    pub multiplier: Multiplier,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    /// Records `measured <= limit`; errors become failed entries.
    fn below(&mut self, name: &str, limit: f64, f: impl FnOnce() -> Result<(f64, String), ExperimentError>) {
        self.push(name, limit, f, |m, l| m <= l);
    }

    fn above(&mut self, name: &str, limit: f64, f: impl FnOnce() -> Result<(f64, String), ExperimentError>) {
        self.push(name, limit, f, |m, l| m > l);
    }

    fn push(
        &mut self,
        name: &str,
        limit: f64,
        f: impl FnOnce() -> Result<(f64, String), ExperimentError>,
        ok: impl Fn(f64, f64) -> bool,
    ) {
        let check = match f() {
            Ok((measured, detail)) => Check {
                name: name.into(),
                passed: measured.is_finite() && ok(measured, limit),
                measured,
                limit,
                detail,
            },
            Err(e) => Check {
                name: name.into(),
                passed: false,
                measured: f64::NAN,
                limit,
                detail: format!("error: {e}"),
            },
        };
        self.checks.push(check);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn run_verification_suite(level: SuiteLevel) -> SuiteReport {
    run_verification_suite_with(level, Multiplier::LineCorrected)
}

/// The suite on grids using `multiplier`; anything but the half-Laplacian
/// symbols is a fault injection and must fail.
pub fn run_verification_suite_with(level: SuiteLevel, multiplier: Multiplier) -> SuiteReport {
    let n = level.n();
    let opts = SolverOptions::default();
    let mut suite = Suite { checks: Vec::new() };
    let grid = match Grid1D::with_multiplier(n, n as f64 / 16.0, multiplier) {
        Ok(g) => g,
        Err(e) => {
            suite.below("grid", 0.0, || Err(e.into()));
            return SuiteReport {
                level,
                n,
                multiplier,
                checks: suite.checks,
            };
        }
    };
    let gs = match solve_q_with(&grid, &opts, GroundStateMethod::Flow, None) {
        Ok(gs) => gs,
        Err(e) => {
            suite.below("pohozaev", 1e-4, || Err(IoError::from(e).into()));
            return SuiteReport {
                level,
                n,
                multiplier,
                checks: suite.checks,
            };
        }
    };
    let a = gs.a_star;

    suite.below("pohozaev", 1e-4, || {
        let p = PohozaevReport::of(&gs.q);
        Ok((p.max_rel_residual, format!("K = {}, M = {}, P/2 = {}", p.kinetic, p.mass, p.half_quartic)))
    });
    suite.below("a_star_methods", 1e-5, || {
        let fp = solve_q_with(&grid, &opts, GroundStateMethod::FixedPoint, None).map_err(IoError::from)?;
        Ok((rel(fp.a_star, a), format!("flow {a}, fixed point {}", fp.a_star)))
    });
    suite.below("gn_sharpness", 1e-4, || {
        let w = gn_quotient(&gs.q).map_err(IoError::from)?;
        Ok((rel(w, 0.5 * a), format!("W(Q) = {w}, a*/2 = {}", 0.5 * a)))
    });
    suite.below("kappa_t0", 1e-12, || {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let (a1, a2) = (r.gen_range(0.01..0.99) * a, r.gen_range(0.01..0.99) * a);
            let th = compute_thresholds(a1, a2, a);
            let k = kappa(th.t0.expect("a_i < a*"), a1, a2, th.beta_lower.expect("a_i < a*"), a)?;
            worst = worst.max((k - 1.0).abs());
        }
        Ok((worst, "max |kappa(t0) - 1| over 100 samples".into()))
    });
    suite.above("kappa_inf_below_beta_lower", 1.0, || {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let mut least = f64::INFINITY;
        for _ in 0..100 {
            let (a1, a2) = (r.gen_range(0.01..0.99) * a, r.gen_range(0.01..0.99) * a);
            let b = 0.9 * compute_thresholds(a1, a2, a).beta_lower.expect("a_i < a*");
            least = least.min(kappa_inf(a1, a2, b, a)?.value);
        }
        Ok((least, "min inf kappa at beta = 0.9 beta_*".into()))
    });
    let flat = |a1: f64, a2: f64, b: f64| {
        SystemParams::new(a1, a2, b, PotentialSpec::Flat, PotentialSpec::Flat).map(|p| p.with_edge_min(0.0))
    };
    suite.below("gamma_diagonal", 2e-2, || {
        let mut worst = 0.0_f64;
        let mut detail = Vec::new();
        for b in [0.0, 0.2, 0.4] {
            let g = gamma_estimate(&flat(0.5 * a, 0.5 * a, b * a)?, &grid, &gs, &opts)?;
            let exact = 1.0 / (0.5 + b);
            let raw = g.raw.unwrap_or(f64::NAN);
            worst = worst.max(rel(raw, exact).max(rel(g.value, exact)));
            detail.push(format!("beta = {b} a*: {raw} vs {exact}"));
        }
        Ok((worst, detail.join("; ")))
    });
    suite.below("gamma_negative_beta", 1e-12, || {
        let neg = gamma_estimate(&flat(0.3 * a, 0.6 * a, -0.3 * a)?, &grid, &gs, &opts)?;
        let zero = gamma_estimate(&flat(0.3 * a, 0.6 * a, 0.0)?, &grid, &gs, &opts)?;
        let (x, y) = (neg.raw.unwrap_or(f64::NAN), zero.raw.unwrap_or(f64::NAN));
        Ok((rel(x, y), format!("Gamma(beta < 0) = {x}, Gamma(0) = {y}")))
    });
    // R = 64 needs 4096 points on [-2, 2) at every level.
    let fit = Grid1D::with_multiplier(4096, 2.0, multiplier)
        .map_err(ExperimentError::from)
        .and_then(|g| Ok(psi_r_fit(&g, &gs, 0.0, &[8.0, 16.0, 32.0, 64.0])?));
    let fit_ref = fit.as_ref().map_err(|e| e.to_string());
    suite.below("psi_r_kinetic_slope", 2e-2, || match &fit_ref {
        Ok(f) => Ok((rel(f.kinetic_slope, 1.0), format!("slope {}", f.kinetic_slope))),
        Err(e) => Err(ExperimentError::Config(e.clone())),
    });
    suite.below("psi_r_quartic_slope", 2e-2, || match &fit_ref {
        Ok(f) => Ok((rel(f.quartic_slope, 2.0 / a), format!("slope {}, 2/a* = {}", f.quartic_slope, 2.0 / a))),
        Err(e) => Err(ExperimentError::Config(e.clone())),
    });
    suite.below("critical_sandwich", 1e-3, || {
        let p = SystemParams::harmonic(0.6 * a, 0.6 * a, 0.4 * a, 1.0)?;
        let c = critical_energy(&p, &grid, &gs, &opts)?;
        // Distance outside [0, floor].
        let miss = (-c.estimate).max(c.estimate - c.floor).max(0.0);
        Ok((miss, format!("e-hat = {}, floor = {}", c.estimate, c.floor)))
    });
    let soliton = coupled_soliton(0.3 * a, 0.5 * a, &gs, None);
    suite.below("system_pohozaev", 1e-4, || {
        let c = soliton.as_ref().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok((c.pohozaev_residual, format!("system residual {:e}", c.system_residual)))
    });
    suite.below("system_residual", 10.0 * opts.tol, || {
        let c = soliton.as_ref().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok((c.system_residual, "sup norm of both equations".into()))
    });
    suite.below("appendix_k_s_rho1", 1e-10, || {
        let c = soliton.as_ref().map_err(|e| ExperimentError::Config(e.to_string()))?;
        let exact = 1.0 / (0.8 * a);
        let worst = c.linear_residual.max((c.k - exact).abs()).max((c.s - exact).abs()).max((c.rho1 - 1.0 / 0.8).abs());
        Ok((worst, format!("k = {}, s = {}, rho1 = {}", c.k, c.s, c.rho1)))
    });
    suite.below("appendix_p", 1e-4, || {
        let c = coupled_soliton(0.5 * a, 0.5 * a, &gs, Some(std::f64::consts::FRAC_PI_4))?;
        Ok((rel(c.p_value, 1.0), format!("P = {}, a*/(2a) = 1", c.p_value)))
    });
    SuiteReport {
        level,
        n,
        multiplier,
        checks: suite.checks,
    }
}

// ---------------------------------------------------------------------------
// Plots

fn verdict_code(v: Verdict) -> f64 {
    match v {
        Verdict::NotExists => 0.0,
        Verdict::Indeterminate => 0.5,
        Verdict::Exists => 1.0,
        Verdict::ExistsNearBetaLower => 1.5,
    }
}

/// First `β` (in units of `a*`) where the verdict turns to `NotExists`, taken
/// halfway between the last non-`NotExists` and the first `NotExists` cell.
pub fn crossing_curves(table: &SweepTable) -> Vec<[f64; 5]> {
    let mut groups: BTreeMap<(u64, u64), Vec<&SweepRow>> = BTreeMap::new();
    for r in &table.rows {
        groups.entry((r.a1.to_bits(), r.a2.to_bits())).or_default().push(r);
    }
    let mut out = Vec::new();
    for rows in groups.values_mut() {
        rows.sort_by(|x, y| x.beta.total_cmp(&y.beta));
        let a = rows[0].a_star;
        let flip = rows
            .windows(2)
            .find(|w| w[0].verdict != Verdict::NotExists && w[1].verdict == Verdict::NotExists);
        if let Some(w) = flip {
            let r = w[0];
            out.push([
                r.a1 / a,
                r.a2 / a,
                0.5 * (w[0].beta + w[1].beta) / a,
                r.beta_lower.map_or(f64::NAN, |b| b / a),
                r.beta_upper / a,
            ]);
        }
    }
    out
}

/// Writes per-`β` phase-diagram slices, the crossing curve and gnuplot scripts.
pub fn emit_plots(table: &SweepTable, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::EmptyTable);
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let betas: BTreeSet<u64> = table.rows.iter().map(|r| (r.beta / r.a_star).to_bits()).collect();
    for (k, bits) in betas.iter().enumerate() {
        let b = f64::from_bits(*bits);
        let csv_name = format!("phase_beta_{k}.csv");
        let mut w = csv::Writer::from_path(out_dir.join(&csv_name))?;
        w.write_record(["a1_over_astar", "a2_over_astar", "verdict_code", "gamma", "verdict"])?;
        let mut a1s = HashSet::new();
        for r in table.rows.iter().filter(|r| (r.beta / r.a_star).to_bits() == *bits) {
            a1s.insert(r.a1.to_bits());
            w.write_record([
                num(r.a1 / r.a_star),
                num(r.a2 / r.a_star),
                num(verdict_code(r.verdict)),
                opt(r.gamma_value),
                r.verdict.to_string(),
            ])?;
        }
        w.flush()?;
        written.push(out_dir.join(&csv_name));
        let script = format!(
            "# Phase diagram at beta = {b} a*.\n\
             # 0 = NotExists, 0.5 = Indeterminate, 1 = Exists, 1.5 = ExistsNearBetaLower\n\
             set datafile separator ','\n\
             set key off\n\
             set xlabel 'a1 / a*'\n\
             set ylabel 'a2 / a*'\n\
             set title 'beta = {b} a*'\n\
             set cbrange [0:1.5]\n\
             set palette defined (0 'black', 0.5 'grey', 1 'blue', 1.5 'cyan')\n\
             set terminal pngcairo size 800,700\n\
             set output 'phase_beta_{k}.png'\n\
             plot '{csv_name}' every ::1 using 1:2:3 with points pt 5 ps 2 palette, \\\n\
             \x20    1 with lines lt 0, '+' using (1):($0/100.0*1.3) with lines lt 0\n"
        );
        let gp = out_dir.join(format!("phase_beta_{k}.gp"));
        fs::write(&gp, script)?;
        written.push(gp);
    }

    let curves = crossing_curves(table);
    let path = out_dir.join("crossing.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["a1_over_astar", "a2_over_astar", "beta_cross_over_astar", "beta_lower_over_astar", "beta_upper_over_astar"])?;
    for c in &curves {
        w.write_record(c.map(num))?;
    }
    w.flush()?;
    written.push(path);
    let gp = out_dir.join("crossing.gp");
    fs::write(
        &gp,
        "# beta at which the verdict turns to NotExists, against a1 / a*,\n\
         # with the closed-form thresholds for comparison.\n\
         set datafile separator ','\n\
         set xlabel 'a1 / a*'\n\
         set ylabel 'beta / a*'\n\
         set terminal pngcairo size 800,600\n\
         set output 'crossing.png'\n\
         plot 'crossing.csv' every ::1 using 1:3 with points pt 7 title 'verdict flip', \\\n\
         \x20    '' every ::1 using 1:4 with lines title 'beta_*', \\\n\
         \x20    '' every ::1 using 1:5 with lines title 'beta**'\n",
    )?;
    written.push(gp);
    Ok(written)
}
