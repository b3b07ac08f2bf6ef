//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use fracbec::constrained::{initial_pair, minimize, sandwich_check, ConstrainedError, SystemParams};
use fracbec::experiments::{emit_plots, run_sweep, run_verification_suite_with, SuiteLevel, SweepConfig, SweepSpec, SweepTable};
use fracbec::ground_state::{solve_q_with, verify_decay, GroundStateMethod, PohozaevReport};
use fracbec::io::{ground_state_for, write_field};
use fracbec::potential::{PotentialSpec, DEFAULT_EDGE_MIN};
use fracbec::spectral::{Grid1D, Multiplier};
use fracbec::thresholds::{
    classify, compute_thresholds, coupled_soliton, find_gamma_crossing, gamma_estimate,
    logspace, p_lower_bound_check, psi_r_trace, scaling_probe, truncated_soliton, ClassifyOptions, PsiRMode,
    ThresholdError, DEFAULT_GAMMA_BAND,
};
use fracbec::{GroundState, SolverOptions};

#[derive(Parser)]
#[command(name = "fracbec", version, about = "Two-component half-Laplacian Schrödinger systems with traps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the ground state Q and report a*.
    GroundState(GroundStateArgs),
    /// Run the constrained flow for one parameter point.
    Minimize(MinimizeArgs),
    /// Existence verdict with the rule that decided it.
    Classify(ClassifyArgs),
    /// Estimate the coupled quotient Gamma.
    Gamma(PointArgs),
    /// Locate the beta where Gamma reaches one.
    Crossing(CrossingArgs),
    /// Energy traces along the scaling family or the psi_R family.
    Probe(ProbeArgs),
    /// Identities of the explicit coupled solitons.
    AppendixVerify(AppendixArgs),
    /// Parameter sweep from a TOML config.
    Sweep(SweepArgs),
    /// Built-in verification suite.
    Verify(VerifyArgs),
    /// CSV and gnuplot files from a sweep table.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MultiplierArg {
    LineCorrected,
    Periodic,
}

impl From<MultiplierArg> for Multiplier {
    fn from(m: MultiplierArg) -> Self {
        match m {
            MultiplierArg::LineCorrected => Multiplier::LineCorrected,
            MultiplierArg::Periodic => Multiplier::Periodic,
        }
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Grid points.
    #[arg(long, default_value_t = 1024)]
    n: usize,
    /// Box half-length; the box is [-L, L).
    #[arg(long = "L", default_value_t = 64.0)]
    l: f64,
    #[arg(long, value_enum, default_value = "line-corrected")]
    multiplier: MultiplierArg,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
}

impl GridArgs {
    fn grid(&self) -> Result<Grid1D> {
        Ok(Grid1D::with_multiplier(self.n, self.l, self.multiplier.into())?)
    }

    fn opts(&self) -> SolverOptions {
        SolverOptions::default().with_tol(self.tol).with_max_iter(self.max_iter)
    }

    fn ground_state(&self) -> Result<(Grid1D, GroundState)> {
        let grid = self.grid()?;
        let gs = ground_state_for(&grid, &self.opts()).context("solving for Q")?;
        Ok((grid, gs))
    }
}

#[derive(Args)]
struct Couplings {
    #[arg(long, allow_hyphen_values = true)]
    a1: f64,
    #[arg(long, allow_hyphen_values = true)]
    a2: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    /// Read a1, a2, beta in units of a*.
    #[arg(long)]
    relative: bool,
}

impl Couplings {
    fn absolute(&self, a_star: f64) -> [f64; 3] {
        let s = if self.relative { a_star } else { 1.0 };
        [self.a1 * s, self.a2 * s, self.beta * s]
    }
}

#[derive(Args)]
struct Traps {
    /// kind[:param[:param]], e.g. harmonic, harmonic:0.5, shifted-well:3, double-well:2:0.1, power:4, flat.
    #[arg(long, default_value = "harmonic")]
    potential1: PotentialSpec,
    #[arg(long, default_value = "harmonic")]
    potential2: PotentialSpec,
    /// Smallest admissible trap value at the box edge.
    #[arg(long, default_value_t = DEFAULT_EDGE_MIN)]
    edge_min: f64,
}

impl Traps {
    fn params(&self, [a1, a2, beta]: [f64; 3]) -> Result<SystemParams> {
        Ok(SystemParams::new(a1, a2, beta, self.potential1.clone(), self.potential2.clone())?
            .with_edge_min(self.edge_min))
    }
}

#[derive(Args)]
struct GroundStateArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Output field (.json for the text form, FRACFLD1 binary otherwise).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "flow")]
    method: GroundStateMethod,
    /// Report path; defaults to the output path with `.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct MinimizeArgs {
    #[command(flatten)]
    couplings: Couplings,
    #[command(flatten)]
    traps: Traps,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
    /// Writes `<prefix>_u1.frfld` and `<prefix>_u2.frfld`.
    #[arg(long)]
    dump_fields: Option<String>,
    /// Perturbs the initial data with seeded random bumps.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    couplings: Couplings,
    #[command(flatten)]
    traps: Traps,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_GAMMA_BAND)]
    gamma_band: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    couplings: Couplings,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrossingArgs {
    #[arg(long)]
    a1: f64,
    #[arg(long)]
    a2: f64,
    /// Read a1, a2 in units of a*.
    #[arg(long)]
    relative: bool,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeKind {
    Scaling,
    PsiR,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeComponent {
    /// Component 1 alone, or the pair, chosen from the couplings.
    Auto,
    One,
    Two,
    Pair,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, value_enum)]
    kind: ProbeKind,
    #[command(flatten)]
    couplings: Couplings,
    #[command(flatten)]
    traps: Traps,
    #[command(flatten)]
    grid: GridArgs,
    /// Which components concentrate along psi_R.
    #[arg(long, value_enum, default_value = "auto")]
    component: ProbeComponent,
    /// Trace points, log-spaced (lambda in [1, 1e3] or R in [2, 1e3]).
    #[arg(long, default_value_t = 31)]
    points: usize,
    /// CSV trace path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AppendixArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    beta: f64,
    /// Angle selecting a soliton when a = beta, in (0, 2 pi).
    #[arg(long)]
    theta: Option<f64>,
    /// Read a, beta in units of a*.
    #[arg(long)]
    relative: bool,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    /// Replace |xi| by |xi|^2.
    Squared,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "fast")]
    level: SuiteLevel,
    /// Injects a deliberate fault; the suite must then fail.
    #[arg(long, value_enum)]
    fault: Option<FaultArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn ground_state_cmd(args: GroundStateArgs) -> Result<ExitCode> {
    let grid = args.grid.grid()?;
    let gs = solve_q_with(&grid, &args.grid.opts(), args.method, None)?;
    write_field(&args.out, &gs.q)?;
    let p = PohozaevReport::of(&gs.q);
    let decay = verify_decay(&gs);
    let report = json!({
        "a_star": gs.a_star,
        "residual": gs.residual,
        "iterations": gs.iterations,
        "method": gs.method,
        "pohozaev_residuals": {
            "kinetic_minus_mass": (p.kinetic - p.mass) / p.mass,
            "kinetic_minus_half_quartic": (p.kinetic - p.half_quartic) / p.mass,
            "mass_minus_half_quartic": (p.mass - p.half_quartic) / p.mass,
            "max_relative": p.max_rel_residual,
        },
        "decay_ratio": decay.ratio,
        "decay": decay,
    });
    let path = args.report.unwrap_or_else(|| args.out.with_extension("report.json"));
    emit(&report, Some(&path))?;
    emit(&report, None)?;
    Ok(ExitCode::SUCCESS)
}

fn minimize_cmd(args: MinimizeArgs) -> Result<ExitCode> {
    let (grid, gs) = args.grid.ground_state()?;
    let params = args.traps.params(args.couplings.absolute(gs.a_star))?;
    let opts = args.grid.opts();
    let init = match args.seed {
        Some(s) => Some(initial_pair(&params, &grid, Some(s))?),
        None => None,
    };
    let result = match minimize(&params, &grid, &opts, init) {
        Ok(r) => r,
        Err(ConstrainedError::DivergingEnergy(r)) | Err(ConstrainedError::NoConvergence(r)) => *r,
        Err(e) => return Err(e.into()),
    };
    let mut doc = serde_json::to_value(&result)?;
    doc["a_star"] = json!(gs.a_star);
    if let Ok(s) = sandwich_check(&params, gs.a_star, result.energy, &grid, opts.tol) {
        if s.on_critical_line {
            doc["sandwich"] = serde_json::to_value(s)?;
        }
    }
    emit(&doc, Some(&args.out))?;
    if let Some(prefix) = args.dump_fields {
        write_field(Path::new(&format!("{prefix}_u1.frfld")), &result.u1)?;
        write_field(Path::new(&format!("{prefix}_u2.frfld")), &result.u2)?;
    }
    eprintln!(
        "energy {:.12} converged {} iterations {}{}",
        result.energy,
        result.converged,
        result.iterations,
        result
            .diverged_evidence
            .as_ref()
            .map(|e| format!(" diverging ({:?})", e.reason))
            .unwrap_or_default()
    );
    Ok(ExitCode::SUCCESS)
}

fn classify_cmd(args: ClassifyArgs) -> Result<ExitCode> {
    let (grid, gs) = args.grid.ground_state()?;
    let params = args.traps.params(args.couplings.absolute(gs.a_star))?;
    let copts = ClassifyOptions {
        gamma_band: args.gamma_band,
        always_gamma: true,
    };
    let c = classify(&params, &gs, &grid, &args.grid.opts(), &copts)?;
    emit(&c, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn gamma_cmd(args: PointArgs) -> Result<ExitCode> {
    let (grid, gs) = args.grid.ground_state()?;
    let [a1, a2, beta] = args.couplings.absolute(gs.a_star);
    let params = SystemParams::new(a1, a2, beta, PotentialSpec::Flat, PotentialSpec::Flat)?.with_edge_min(0.0);
    let estimate = match gamma_estimate(&params, &grid, &gs, &args.grid.opts()) {
        Ok(g) => g,
        Err(ThresholdError::NoConvergence(g)) => *g,
        Err(e) => return Err(e.into()),
    };
    let doc = json!({
        "a_star": gs.a_star,
        "thresholds": compute_thresholds(a1, a2, gs.a_star),
        "gamma": estimate,
    });
    emit(&doc, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn crossing_cmd(args: CrossingArgs) -> Result<ExitCode> {
    let (grid, gs) = args.grid.ground_state()?;
    let s = if args.relative { gs.a_star } else { 1.0 };
    let c = find_gamma_crossing(args.a1 * s, args.a2 * s, &gs, &grid, &args.grid.opts())?;
    let mut doc = serde_json::to_value(&c)?;
    doc["a_star"] = json!(gs.a_star);
    emit(&doc, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn probe_cmd(args: ProbeArgs) -> Result<ExitCode> {
    if args.points < 2 {
        bail!("--points must be at least 2");
    }
    let (grid, gs) = args.grid.ground_state()?;
    let params = args.traps.params(args.couplings.absolute(gs.a_star))?;
    let trace = match args.kind {
        ProbeKind::Scaling => {
            let u = truncated_soliton(&gs);
            scaling_probe(&u, &u, &params, &logspace(1.0, 1e3, args.points))?
        }
        ProbeKind::PsiR => {
            let rs = logspace(2.0, 1e3, args.points);
            let mode = match args.component {
                ProbeComponent::One => PsiRMode::Single(0),
                ProbeComponent::Two => PsiRMode::Single(1),
                ProbeComponent::Pair => PsiRMode::Pair,
                ProbeComponent::Auto if params.a1 > gs.a_star => PsiRMode::Single(0),
                ProbeComponent::Auto if params.a2 > gs.a_star => PsiRMode::Single(1),
                ProbeComponent::Auto => PsiRMode::Pair,
            };
            psi_r_trace(&params, &grid, &gs, &rs, mode)?
        }
    };
    let csv = trace.to_csv();
    match &args.out {
        Some(p) => {
            fs::write(p, &csv)?;
            let summary = json!({
                "kind": trace.kind,
                "slope": trace.slope,
                "analytic_slope": trace.analytic_slope,
                "monotone_decreasing": trace.monotone_decreasing,
                "diverges": trace.diverges(),
                "trace": p,
            });
            emit(&summary, None)?;
        }
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn appendix_cmd(args: AppendixArgs) -> Result<ExitCode> {
    let (_, gs) = args.grid.ground_state()?;
    let s = if args.relative { gs.a_star } else { 1.0 };
    let (a, beta) = (args.a * s, args.beta * s);
    let c = coupled_soliton(a, beta, &gs, args.theta)?;
    let mut doc = serde_json::to_value(&c)?;
    doc["a_star"] = json!(gs.a_star);
    doc["expected_rho1"] = json!(gs.a_star / (a + beta));
    doc["solver_tol"] = json!(args.grid.tol);
    if (a - beta).abs() > 1e-14 * a {
        doc["expected_k"] = json!(1.0 / (a + beta));
    } else {
        doc["expected_p"] = json!(gs.a_star / (2.0 * a));
        doc["p_lower_bound"] = serde_json::to_value(p_lower_bound_check(&gs, a, 50, 1)?)?;
    }
    emit(&doc, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn sweep_cmd(args: SweepArgs) -> Result<ExitCode> {
    let config = SweepConfig::load(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let spec = SweepSpec {
        config,
        out_dir: args.out.clone(),
        resume: args.resume,
        workers: args.workers,
    };
    let table = run_sweep(&spec)?;
    eprintln!("{} rows written to {}", table.rows.len(), args.out.join("sweep.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(args: VerifyArgs) -> Result<ExitCode> {
    let multiplier = match args.fault {
        Some(FaultArg::Squared) => Multiplier::Squared,
        None => Multiplier::LineCorrected,
    };
    let report = run_verification_suite_with(args.level, multiplier);
    for c in &report.checks {
        eprintln!(
            "{} {:<28} {:>12.4e} (limit {:.1e})  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.limit,
            c.detail
        );
    }
    emit(&report, args.out.as_deref())?;
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn plot_cmd(args: PlotArgs) -> Result<ExitCode> {
    let table = SweepTable::read(&args.table).with_context(|| format!("reading {}", args.table.display()))?;
    for f in emit_plots(&table, &args.out)? {
        println!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GroundState(a) => ground_state_cmd(a),
        Command::Minimize(a) => minimize_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Gamma(a) => gamma_cmd(a),
        Command::Crossing(a) => crossing_cmd(a),
        Command::Probe(a) => probe_cmd(a),
        Command::AppendixVerify(a) => appendix_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
