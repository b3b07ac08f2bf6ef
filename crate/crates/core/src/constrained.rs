//! The two-component energy
//!
//! ```text
//! E(u₁,u₂) = Σᵢ ∫ uᵢ√(-Δ)uᵢ + Vᵢuᵢ² − (aᵢ/2) uᵢ⁴  −  β ∫ u₁²u₂²
//! ```
//!
//! on pairs of unit mass, and its minimization by a normalized gradient flow.
//!
//! Each flow step solves `(1 + τHᵢ) dᵢ = rᵢ` for the Euler–Lagrange residual
//! `rᵢ = Hᵢuᵢ − Nᵢ(u) − μᵢuᵢ` (with `Hᵢ = √(-Δ) + Vᵢ`, `Nᵢ` the cubic terms and
//! `μᵢ` the Rayleigh multiplier), sets `uᵢ ← uᵢ − τdᵢ` and renormalizes. The
//! linear solve is a preconditioned conjugate gradient. Stationary points of
//! the constrained energy are exact fixed points. The step is accepted only
//! if the energy does not increase; `τ` then grows by 10 %, otherwise it is
//! halved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{Potential, PotentialError, PotentialSpec, DEFAULT_EDGE_MIN};
use crate::spectral::{same_grid, Field, Grid1D, SpectralError};
use crate::SolverOptions;

/// Energy below which a flow is reported as diverging.
pub const ENERGY_FLOOR: f64 = -1e6;
/// Reported as diverging once `E < -DROP_FACTOR·|E₀|`.
pub const DROP_FACTOR: f64 = 1e3;
/// Mass fraction in the upper half of the frequency band that counts as
/// collapse onto the grid scale.
pub const COLLAPSE_FRACTION: f64 = 2e-2;

#[derive(Debug, Error, Clone)]
pub enum ConstrainedError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("invalid initial data: {0}")]
    BadInit(String),
    #[error("no convergence after {} iterations (residual {:e})", .0.iterations, .0.el_residual)]
    NoConvergence(Box<MinimizeResult>),
    #[error("energy diverging ({:?}): {:e}", .0.diverged_evidence.as_ref().map(|e| e.reason), .0.energy)]
    DivergingEnergy(Box<MinimizeResult>),
}

impl ConstrainedError {
    /// The last flow state, when the error carries one.
    pub fn partial(&self) -> Option<&MinimizeResult> {
        match self {
            Self::NoConvergence(r) | Self::DivergingEnergy(r) => Some(r),
            _ => None,
        }
    }
}

/// Couplings and traps of the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub a1: f64,
    pub a2: f64,
    pub beta: f64,
    pub v1: PotentialSpec,
    pub v2: PotentialSpec,
    /// Required potential height at the box edge.
    #[serde(default = "default_edge_min")]
    pub edge_min: f64,
}

fn default_edge_min() -> f64 {
    DEFAULT_EDGE_MIN
}

impl SystemParams {
    pub fn new(a1: f64, a2: f64, beta: f64, v1: PotentialSpec, v2: PotentialSpec) -> Result<Self, ConstrainedError> {
        let p = Self {
            a1,
            a2,
            beta,
            v1,
            v2,
            edge_min: DEFAULT_EDGE_MIN,
        };
        p.validate()?;
        Ok(p)
    }

    /// Both components in the same harmonic trap.
    pub fn harmonic(a1: f64, a2: f64, beta: f64, omega: f64) -> Result<Self, ConstrainedError> {
        Self::new(a1, a2, beta, PotentialSpec::harmonic(omega), PotentialSpec::harmonic(omega))
    }

    pub fn with_edge_min(mut self, edge_min: f64) -> Self {
        self.edge_min = edge_min;
        self
    }

    /// Same traps, new couplings.
    pub fn with_couplings(&self, a1: f64, a2: f64, beta: f64) -> Result<Self, ConstrainedError> {
        let p = Self {
            a1,
            a2,
            beta,
            ..self.clone()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ConstrainedError> {
        if !(self.a1.is_finite() && self.a1 > 0.0 && self.a2.is_finite() && self.a2 > 0.0) {
            return Err(ConstrainedError::InvalidParams(format!(
                "a1 = {}, a2 = {} must be finite and positive",
                self.a1, self.a2
            )));
        }
        if !self.beta.is_finite() {
            return Err(ConstrainedError::InvalidParams("beta must be finite".into()));
        }
        if !(self.edge_min.is_finite() && self.edge_min >= 0.0) {
            return Err(ConstrainedError::InvalidParams("edge_min must be finite and >= 0".into()));
        }
        self.v1.validate()?;
        self.v2.validate()?;
        Ok(())
    }

    pub fn beta_plus(&self) -> f64 {
        self.beta.max(0.0)
    }

    fn a(&self, i: usize) -> f64 {
        [self.a1, self.a2][i]
    }
}

/// The potentials of `params` sampled on `grid`, with the edge check of `params`.
pub fn resolve_potentials(params: &SystemParams, grid: &Grid1D) -> Result<[Potential; 2], ConstrainedError> {
    Ok([
        Potential::resolve(&params.v1, grid, params.edge_min)?,
        Potential::resolve(&params.v2, grid, params.edge_min)?,
    ])
}

/// `min_x (V₁ + V₂)` over the grid, each potential shifted to grid minimum zero.
pub fn potential_floor(params: &SystemParams, grid: &Grid1D) -> Result<f64, ConstrainedError> {
    let v1 = Potential::resolve(&params.v1, grid, 0.0)?;
    let v2 = Potential::resolve(&params.v2, grid, 0.0)?;
    Ok(v1
        .values()
        .iter()
        .zip(v2.values())
        .map(|(a, b)| a + b)
        .fold(f64::INFINITY, f64::min))
}

/// The separate integrals making up the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTerms {
    /// `‖(-Δ)^{1/4}uᵢ‖²`.
    pub kinetic: [f64; 2],
    /// `∫Vᵢuᵢ²`.
    pub potential: [f64; 2],
    /// `∫uᵢ⁴`.
    pub quartic: [f64; 2],
    /// `∫u₁²u₂²`.
    pub cross: f64,
}

impl EnergyTerms {
    pub fn total(&self, a1: f64, a2: f64, beta: f64) -> f64 {
        let [k1, k2] = self.kinetic;
        let [v1, v2] = self.potential;
        let [p1, p2] = self.quartic;
        k1 + k2 + v1 + v2 - 0.5 * a1 * p1 - 0.5 * a2 * p2 - beta * self.cross
    }

    /// The three groups of the energy on the critical line `a₁ = a₂ = a* − β`:
    /// `Σ(‖(-Δ)^{1/4}uᵢ‖² − (a*/2)∫uᵢ⁴)`, `Σ∫Vᵢuᵢ²` and `(β/2)∫(u₁² − u₂²)²`.
    pub fn critical_groups(&self, a_star: f64, beta: f64) -> [f64; 3] {
        let [k1, k2] = self.kinetic;
        let [p1, p2] = self.quartic;
        [
            k1 + k2 - 0.5 * a_star * (p1 + p2),
            self.potential[0] + self.potential[1],
            0.5 * beta * (p1 + p2 - 2.0 * self.cross),
        ]
    }
}

/// Per-call scratch for one grid and parameter point.
struct System<'a> {
    grid: &'a Grid1D,
    params: &'a SystemParams,
    v: [Vec<f64>; 2],
}

struct Nonlinear {
    /// `aᵢ P_N[uᵢ³] + β P_N[uⱼ²uᵢ]`.
    terms: [Vec<f64>; 2],
}

impl<'a> System<'a> {
    fn new(params: &'a SystemParams, grid: &'a Grid1D, edge_min: f64) -> Result<Self, ConstrainedError> {
        let v1 = Potential::resolve(&params.v1, grid, edge_min)?;
        let v2 = Potential::resolve(&params.v2, grid, edge_min)?;
        Ok(Self {
            grid,
            params,
            v: [v1.values().to_vec(), v2.values().to_vec()],
        })
    }

    fn nonlinear(&self, u: [&[f64]; 2]) -> Nonlinear {
        let g = self.grid;
        let r = [g.refine(u[0]), g.refine(u[1])];
        let beta = self.params.beta;
        let mut terms: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let (ri, rj) = (&r[i], &r[1 - i]);
            let a = self.params.a(i);
            let fine: Vec<f64> = ri
                .iter()
                .zip(rj)
                .map(|(x, y)| x * (a * x * x + beta * y * y))
                .collect();
            terms[i] = g.project(&fine);
        }
        Nonlinear { terms }
    }

    fn terms(&self, u: [&[f64]; 2]) -> EnergyTerms {
        let g = self.grid;
        let r = [g.refine(u[0]), g.refine(u[1])];
        let pot = |i: usize| g.integrate(u[i].iter().zip(&self.v[i]).map(|(x, v)| v * x * x));
        EnergyTerms {
            kinetic: [g.seminorm_sq(u[0]), g.seminorm_sq(u[1])],
            potential: [pot(0), pot(1)],
            quartic: [
                g.integrate_fine(r[0].iter().map(|x| x.powi(4))),
                g.integrate_fine(r[1].iter().map(|x| x.powi(4))),
            ],
            cross: g.integrate_fine(r[0].iter().zip(&r[1]).map(|(x, y)| x * x * y * y)),
        }
    }

    fn energy(&self, u: [&[f64]; 2]) -> f64 {
        let p = self.params;
        self.terms(u).total(p.a1, p.a2, p.beta)
    }

    /// `Hᵢuᵢ = √(-Δ)uᵢ + Vᵢuᵢ`.
    fn linear(&self, i: usize, u: &[f64]) -> Vec<f64> {
        let mut out = self.grid.sqrt_laplacian(u);
        for ((o, x), v) in out.iter_mut().zip(u).zip(&self.v[i]) {
            *o += v * x;
        }
        out
    }

    /// Solves `(1 + τHᵢ) d = r` by Jacobi-preconditioned conjugate gradients.
    fn solve_shifted(&self, i: usize, tau: f64, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mean_symbol = self.grid.symbol().iter().sum::<f64>() / n as f64;
        let diag: Vec<f64> = self.v[i].iter().map(|v| 1.0 + tau * (mean_symbol + v)).collect();
        let apply = |x: &[f64]| -> Vec<f64> {
            let hx = self.linear(i, x);
            x.iter().zip(&hx).map(|(a, b)| a + tau * b).collect()
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut x: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let ax = apply(&x);
        let mut res: Vec<f64> = r.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let mut z: Vec<f64> = res.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&res, &z);
        let target = 1e-24 * dot(r, r).max(f64::MIN_POSITIVE);
        for _ in 0..200 {
            if dot(&res, &res) <= target {
                break;
            }
            let ap = apply(&p);
            let alpha = rz / dot(&p, &ap);
            for k in 0..n {
                x[k] += alpha * p[k];
                res[k] -= alpha * ap[k];
            }
            for k in 0..n {
                z[k] = res[k] / diag[k];
            }
            let rz_new = dot(&res, &z);
            let b = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + b * p[k];
            }
        }
        x
    }
}

/// `E(u₁,u₂)`.
pub fn energy(u1: &Field, u2: &Field, params: &SystemParams) -> Result<f64, ConstrainedError> {
    let t = energy_terms(u1, u2, params)?;
    Ok(t.total(params.a1, params.a2, params.beta))
}

pub fn energy_terms(u1: &Field, u2: &Field, params: &SystemParams) -> Result<EnergyTerms, ConstrainedError> {
    same_grid(u1, u2)?;
    let sys = System::new(params, u1.grid(), 0.0)?;
    Ok(sys.terms([u1.values(), u2.values()]))
}

/// The unconstrained `L²` gradient `2(Hᵢuᵢ − aᵢuᵢ³ − βuⱼ²uᵢ)` of the energy.
pub fn grad_energy(u1: &Field, u2: &Field, params: &SystemParams) -> Result<(Field, Field), ConstrainedError> {
    same_grid(u1, u2)?;
    let grid = u1.grid();
    let sys = System::new(params, grid, 0.0)?;
    let u = [u1.values(), u2.values()];
    let nl = sys.nonlinear(u);
    let grad = |i: usize| {
        let h = sys.linear(i, u[i]);
        let values = h.iter().zip(&nl.terms[i]).map(|(a, b)| 2.0 * (a - b)).collect();
        Field::new(grid, values)
    };
    Ok((grad(0)?, grad(1)?))
}

/// Why a flow was reported as diverging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceReason {
    /// Energy dropped below [`ENERGY_FLOOR`].
    EnergyFloor,
    /// Energy dropped below `-DROP_FACTOR·|E₀|`.
    EnergyDrop,
    /// A component focused onto the grid scale.
    CollapseToGrid,
    /// A trial family's energy decreased without bound over the probed range.
    TrialFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEvidence {
    pub reason: DivergenceReason,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest mass fraction of a component in `|k| > n/4`.
    pub high_band_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeResult {
    #[serde(skip)]
    pub u1: Field,
    #[serde(skip)]
    pub u2: Field,
    pub energy: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `maxᵢ ‖Hᵢuᵢ − Nᵢ − μᵢuᵢ‖∞ / ‖uᵢ‖∞`.
    pub el_residual: f64,
    pub masses: [f64; 2],
    pub diverged_evidence: Option<DivergenceEvidence>,
    /// `∫x uᵢ² dx`, the location the flow selected.
    pub centers: [f64; 2],
    /// Energies of the accepted iterates, starting with the initial pair.
    #[serde(skip)]
    pub energy_trace: Vec<f64>,
}

/// Gaussian bumps of unit width at each potential's first grid minimizer,
/// optionally perturbed by seeded random bumps.
pub fn initial_pair(params: &SystemParams, grid: &Grid1D, seed: Option<u64>) -> Result<(Field, Field), ConstrainedError> {
    let v1 = Potential::resolve(&params.v1, grid, 0.0)?;
    let v2 = Potential::resolve(&params.v2, grid, 0.0)?;
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut bump = |v: &Potential| {
        let c = v.minimizers().first().copied().unwrap_or(0.0);
        let extra: Vec<(f64, f64, f64)> = match rng.as_mut() {
            Some(r) => (0..3)
                .map(|_| (r.gen_range(-0.1..0.1), c + r.gen_range(-2.0..2.0), r.gen_range(0.5..2.0)))
                .collect(),
            None => Vec::new(),
        };
        let f = Field::from_fn(grid, |x| {
            (-0.5 * (x - c).powi(2)).exp()
                + extra
                    .iter()
                    .map(|(a, m, w)| a * (-((x - m) / w).powi(2)).exp())
                    .sum::<f64>()
        });
        f.normalized().expect("bump has positive mass")
    };
    Ok((bump(&v1), bump(&v2)))
}

fn high_band_fraction(grid: &Grid1D, u: &[f64]) -> f64 {
    let c = grid.forward(u);
    let n = grid.n() as i64;
    let mut hi = 0.0;
    let mut all = 0.0;
    for (k, ck) in c.iter().enumerate() {
        let kk = if (k as i64) < n / 2 { k as i64 } else { k as i64 - n };
        let w = ck.norm_sqr();
        all += w;
        if kk.abs() > n / 4 {
            hi += w;
        }
    }
    if all > 0.0 {
        hi / all
    } else {
        0.0
    }
}

fn normalize(grid: &Grid1D, u: &mut [f64]) -> f64 {
    let m = grid.integrate(u.iter().map(|v| v * v));
    let s = 1.0 / m.sqrt();
    u.iter_mut().for_each(|v| *v *= s);
    m
}

fn max_abs(u: &[f64]) -> f64 {
    u.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Runs the normalized gradient flow from `init` (default: [`initial_pair`]).
///
/// Returns `Err(DivergingEnergy)` when the energy crosses the divergence
/// thresholds or a component collapses onto the grid, and
/// `Err(NoConvergence)` when the residual does not reach `opts.tol` within
/// `opts.max_iter` steps; both carry the last state.
pub fn minimize(
    params: &SystemParams,
    grid: &Grid1D,
    opts: &SolverOptions,
    init: Option<(Field, Field)>,
) -> Result<MinimizeResult, ConstrainedError> {
    params.validate()?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(ConstrainedError::InvalidParams("tol must be positive and max_iter >= 1".into()));
    }
    let sys = System::new(params, grid, params.edge_min)?;
    let (i1, i2) = match init {
        Some((a, b)) => (a.on_grid(grid)?, b.on_grid(grid)?),
        None => initial_pair(params, grid, None)?,
    };
    let mut u = [i1.into_values(), i2.into_values()];
    for ui in &mut u {
        let m = grid.integrate(ui.iter().map(|v| v * v));
        if !(m > 0.0) {
            return Err(ConstrainedError::BadInit("initial fields need positive mass".into()));
        }
        normalize(grid, ui);
    }

    let mut e = sys.energy([&u[0], &u[1]]);
    let e0 = e;
    let mut trace = vec![e];
    let mut tau = opts.dt0;
    let mut iterations = 0;
    let mut outcome = Outcome::Exhausted;
    let mut stat = stationarity(&sys, &u);

    while iterations < opts.max_iter {
        if stat.el < opts.tol {
            outcome = if high_band_fraction(grid, &u[0]).max(high_band_fraction(grid, &u[1])) > COLLAPSE_FRACTION {
                Outcome::Diverged(DivergenceReason::CollapseToGrid)
            } else {
                Outcome::Converged
            };
            break;
        }
        iterations += 1;
        let mut cand = u.clone();
        for i in 0..2 {
            let d = sys.solve_shifted(i, tau, &stat.residual[i]);
            for (c, dk) in cand[i].iter_mut().zip(&d) {
                *c -= tau * dk;
            }
            normalize(grid, &mut cand[i]);
        }
        let ec = sys.energy([&cand[0], &cand[1]]);
        if ec.is_finite() && ec <= e + 1e-12 * e.abs().max(1.0) {
            u = cand;
            e = ec;
            trace.push(e);
            tau = (tau * 1.1).min(1e4);
            stat = stationarity(&sys, &u);
            if e < ENERGY_FLOOR {
                outcome = Outcome::Diverged(DivergenceReason::EnergyFloor);
                break;
            }
            if e < -DROP_FACTOR * e0.abs().max(1e-3) {
                outcome = Outcome::Diverged(DivergenceReason::EnergyDrop);
                break;
            }
            if high_band_fraction(grid, &u[0]).max(high_band_fraction(grid, &u[1])) > COLLAPSE_FRACTION {
                outcome = Outcome::Diverged(DivergenceReason::CollapseToGrid);
                break;
            }
        } else {
            tau *= 0.5;
            if tau < 1e-14 {
                break;
            }
        }
    }

    let band = high_band_fraction(grid, &u[0]).max(high_band_fraction(grid, &u[1]));
    let centers = [0, 1].map(|i| grid.integrate(grid.xs().iter().zip(&u[i]).map(|(x, v)| x * v * v)));
    let masses = [0, 1].map(|i| grid.integrate(u[i].iter().map(|v| v * v)));
    let [v1, v2] = u;
    let mut result = MinimizeResult {
        u1: Field::new(grid, v1)?,
        u2: Field::new(grid, v2)?,
        energy: e,
        mu1: stat.mu[0],
        mu2: stat.mu[1],
        iterations,
        converged: false,
        el_residual: stat.el,
        masses,
        diverged_evidence: None,
        centers,
        energy_trace: trace,
    };
    match outcome {
        Outcome::Converged => {
            result.converged = true;
            Ok(result)
        }
        Outcome::Diverged(reason) => {
            result.diverged_evidence = Some(DivergenceEvidence {
                reason,
                initial_energy: e0,
                final_energy: e,
                high_band_fraction: band,
            });
            Err(ConstrainedError::DivergingEnergy(Box::new(result)))
        }
        Outcome::Exhausted => Err(ConstrainedError::NoConvergence(Box::new(result))),
    }
}

enum Outcome {
    Converged,
    Diverged(DivergenceReason),
    Exhausted,
}

struct Stationarity {
    mu: [f64; 2],
    residual: [Vec<f64>; 2],
    el: f64,
}

fn stationarity(sys: &System<'_>, u: &[Vec<f64>; 2]) -> Stationarity {
    let grid = sys.grid;
    let nl = sys.nonlinear([&u[0], &u[1]]);
    let mut mu = [0.0; 2];
    let mut residual: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut el = 0.0_f64;
    for i in 0..2 {
        let g: Vec<f64> = sys
            .linear(i, &u[i])
            .iter()
            .zip(&nl.terms[i])
            .map(|(h, n)| h - n)
            .collect();
        let mass = grid.integrate(u[i].iter().map(|v| v * v));
        mu[i] = grid.integrate(g.iter().zip(&u[i]).map(|(a, b)| a * b)) / mass;
        residual[i] = g.iter().zip(&u[i]).map(|(a, b)| a - mu[i] * b).collect();
        el = el.max(max_abs(&residual[i]) / max_abs(&u[i]));
    }
    Stationarity { mu, residual, el }
}

/// `‖Hᵢuᵢ − aᵢuᵢ³ − βuⱼ²uᵢ − μᵢuᵢ‖∞ / ‖uᵢ‖∞` for given multipliers.
pub fn euler_lagrange_residual(
    u1: &Field,
    u2: &Field,
    mu: [f64; 2],
    params: &SystemParams,
) -> Result<[f64; 2], ConstrainedError> {
    let (g1, g2) = grad_energy(u1, u2, params)?;
    let res = |g: &Field, u: &Field, m: f64| {
        g.values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (0.5 * a - m * b).abs())
            .fold(0.0, f64::max)
            / u.max_abs()
    };
    Ok([res(&g1, u1, mu[0]), res(&g2, u2, mu[1])])
}

/// Outcome of comparing a numeric energy on the critical line with `[0, min(V₁+V₂)]`.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub energy: f64,
    pub lower: f64,
    pub upper: f64,
    pub tol: f64,
    /// Whether `a₁ = a₂ = a* − β` and `β ∈ (0, a*)` held.
    pub on_critical_line: bool,
    pub holds: bool,
}

pub fn sandwich_check(
    params: &SystemParams,
    a_star: f64,
    energy: f64,
    grid: &Grid1D,
    tol: f64,
) -> Result<SandwichReport, ConstrainedError> {
    let target = a_star - params.beta;
    let on_critical_line = (params.a1 - target).abs() <= 1e-12 * a_star
        && (params.a2 - target).abs() <= 1e-12 * a_star
        && params.beta > 0.0
        && params.beta < a_star;
    let upper = potential_floor(params, grid)?;
    Ok(SandwichReport {
        energy,
        lower: 0.0,
        upper,
        tol,
        on_critical_line,
        holds: energy >= -tol && energy <= upper + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{inner_product, lp_norm_pow, Multiplier};

    fn grid() -> Grid1D {
        Grid1D::with_multiplier(256, 48.0, Multiplier::LineCorrected).unwrap()
    }

    fn smooth(grid: &Grid1D, seed: u64) -> Field {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let bumps: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (r.gen_range(0.2..1.0), r.gen_range(-3.0..3.0), r.gen_range(0.7..2.5)))
            .collect();
        Field::from_fn(grid, |x| bumps.iter().map(|(a, c, w)| a * (-((x - c) / w).powi(2)).exp()).sum())
    }

    #[test]
    fn zero_fields_have_zero_energy() {
        let g = grid();
        let p = SystemParams::harmonic(1.0, 1.5, 0.3, 1.0).unwrap();
        let z = Field::zeros(&g);
        assert_eq!(energy(&z, &z, &p).unwrap(), 0.0);
    }

    #[test]
    fn uncoupled_energy_is_nonnegative() {
        let g = grid();
        let p = SystemParams::harmonic(1.0, 1.0, 0.0, 1.0)
            .unwrap()
            .with_couplings(1e-300, 1e-300, 0.0)
            .unwrap();
        for s in 0..10 {
            assert!(energy(&smooth(&g, s), &smooth(&g, s + 100), &p).unwrap() >= 0.0);
        }
    }

    #[test]
    fn rejects_mismatched_grids_and_bad_params() {
        let p = SystemParams::harmonic(1.0, 1.0, 0.0, 1.0).unwrap();
        let a = Field::zeros(&grid());
        let b = Field::zeros(&Grid1D::new(128, 48.0).unwrap());
        assert!(matches!(energy(&a, &b, &p), Err(ConstrainedError::Spectral(SpectralError::GridMismatch))));
        assert!(SystemParams::harmonic(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(SystemParams::harmonic(1.0, f64::NAN, 0.0, 1.0).is_err());
        assert!(SystemParams::harmonic(1.0, 1.0, f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn gradient_of_single_mode() {
        let g = Grid1D::new(64, 8.0).unwrap();
        let p = SystemParams::new(1e-300, 1e-300, 0.0, PotentialSpec::Flat, PotentialSpec::Flat)
            .unwrap()
            .with_edge_min(0.0);
        let k = 3.0 * std::f64::consts::PI / 8.0;
        let f = Field::from_fn(&g, |x| (k * x).cos());
        let (g1, _) = grad_energy(&f, &f, &p).unwrap();
        for (a, b) in g1.values().iter().zip(f.values()) {
            assert!((a - 2.0 * k * b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = grid();
        let p = SystemParams::harmonic(1.3, 0.7, 0.4, 1.0).unwrap();
        let (u1, u2) = (smooth(&g, 1), smooth(&g, 2));
        let (eta1, eta2) = (smooth(&g, 3), smooth(&g, 4));
        let (g1, g2) = grad_energy(&u1, &u2, &p).unwrap();
        let exact = inner_product(&g1, &eta1).unwrap() + inner_product(&g2, &eta2).unwrap();
        let fd = |eps: f64| {
            let plus = energy(
                &u1.combine(1.0, &eta1, eps).unwrap(),
                &u2.combine(1.0, &eta2, eps).unwrap(),
                &p,
            )
            .unwrap();
            let minus = energy(
                &u1.combine(1.0, &eta1, -eps).unwrap(),
                &u2.combine(1.0, &eta2, -eps).unwrap(),
                &p,
            )
            .unwrap();
            (plus - minus) / (2.0 * eps)
        };
        let e3 = (fd(1e-3) - exact).abs();
        let e4 = (fd(1e-4) - exact).abs();
        assert!(e3 < 1e-5 * exact.abs().max(1.0), "{e3}");
        // second order: shrinking eps tenfold shrinks the error ~100x
        assert!(e4 < e3 / 30.0 || e4 < 1e-9 * exact.abs(), "{e3} {e4}");
    }

    #[test]
    fn decoupled_linear_problem_matches_dense_eigensolver() {
        let g = grid();
        let p = SystemParams::harmonic(1e-300, 1e-300, 0.0, 1.0).unwrap();
        let r = minimize(&p, &g, &SolverOptions::default(), None).unwrap();
        assert!(r.converged);

        // dense Hamiltonian √(-Δ) + V from the symbol and the potential
        let n = g.n();
        let v = Potential::resolve(&p.v1, &g, 0.0).unwrap();
        let sym = g.symbol();
        let freqs = g.freqs();
        let mut h = nalgebra::DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let dxj = g.x(j) - g.x(k);
                let s: f64 = (0..n).map(|m| sym[m] * (freqs[m] * dxj).cos()).sum();
                h[(j, k)] = s / n as f64;
            }
            h[(j, j)] += v.values()[j];
        }
        let lambda = h.symmetric_eigen().eigenvalues.min();
        assert!((r.energy - 2.0 * lambda).abs() < 1e-9 * lambda, "{} {}", r.energy, lambda);
        assert!((r.mu1 - lambda).abs() < 1e-8 * lambda);
        assert!(r.energy > 0.0);
    }

    #[test]
    fn masses_stay_unit_and_energy_decreases() {
        let g = grid();
        let p = SystemParams::harmonic(1.2, 0.8, 0.3, 1.0).unwrap();
        let init = initial_pair(&p, &g, Some(5)).unwrap();
        let r = minimize(&p, &g, &SolverOptions::default(), Some(init)).unwrap();
        assert!(r.converged);
        for m in r.masses {
            assert!((m - 1.0).abs() < 1e-12);
        }
        assert!((lp_norm_pow(&r.u1, 2) - 1.0).abs() < 1e-10);
        assert!(r
            .energy_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
        let res = euler_lagrange_residual(&r.u1, &r.u2, [r.mu1, r.mu2], &p).unwrap();
        assert!(res[0] < 1e-6 && res[1] < 1e-6);
        assert!(r.el_residual < 1e-8);
        let (g1, _) = grad_energy(&r.u1, &r.u2, &p).unwrap();
        let rayleigh = 0.5 * inner_product(&g1, &r.u1).unwrap();
        assert!((rayleigh - r.mu1).abs() < 1e-10 * r.mu1.abs().max(1.0));
    }

    #[test]
    fn symmetric_problem_gives_equal_components() {
        let g = grid();
        let p = SystemParams::harmonic(1.0, 1.0, 0.5, 1.0).unwrap();
        let (a, _) = initial_pair(&p, &g, None).unwrap();
        let (_, b) = initial_pair(&p, &g, Some(9)).unwrap();
        let sym = minimize(&p, &g, &SolverOptions::default(), Some((a.clone(), a.clone()))).unwrap();
        assert_eq!(sym.u1, sym.u2);
        let r = minimize(&p, &g, &SolverOptions::default(), Some((a, b))).unwrap();
        let d = r.u1.combine(1.0, &r.u2, -1.0).unwrap().max_abs();
        assert!(d < 1e-6, "{d}");
        assert!((r.energy - sym.energy).abs() < 1e-10);
    }

    #[test]
    fn negative_beta_is_supported() {
        let g = grid();
        let p = SystemParams::harmonic(1.0, 0.5, -0.8, 1.0).unwrap();
        let r = minimize(&p, &g, &SolverOptions::default(), None).unwrap();
        assert!(r.converged);
    }

    #[test]
    fn supercritical_flow_diverges() {
        // stronger than any soliton mass on this grid
        let g = grid();
        let p = SystemParams::harmonic(3.5, 0.5, 0.0, 1.0).unwrap();
        match minimize(&p, &g, &SolverOptions::default(), None) {
            Err(ConstrainedError::DivergingEnergy(r)) => {
                let ev = r.diverged_evidence.unwrap();
                assert!(ev.final_energy < ev.initial_energy);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn weak_trap_is_rejected() {
        let g = grid();
        let p = SystemParams::harmonic(1.0, 1.0, 0.0, 0.1).unwrap();
        assert!(matches!(
            minimize(&p, &g, &SolverOptions::default(), None),
            Err(ConstrainedError::Potential(PotentialError::EdgeTooLow { .. }))
        ));
    }

    #[test]
    fn zero_initial_mass_is_rejected() {
        let g = grid();
        let p = SystemParams::harmonic(1.0, 1.0, 0.0, 1.0).unwrap();
        let z = Field::zeros(&g);
        assert!(matches!(
            minimize(&p, &g, &SolverOptions::default(), Some((z.clone(), z))),
            Err(ConstrainedError::BadInit(_))
        ));
    }

    #[test]
    fn critical_groups_sum_to_energy() {
        let g = grid();
        let a_star = 2.47;
        let beta = 0.8;
        let p = SystemParams::harmonic(a_star - beta, a_star - beta, beta, 1.0).unwrap();
        for s in 0..5 {
            let (u1, u2) = (smooth(&g, s), smooth(&g, s + 50));
            let t = energy_terms(&u1, &u2, &p).unwrap();
            let groups = t.critical_groups(a_star, beta);
            let e = energy(&u1, &u2, &p).unwrap();
            assert!((groups.iter().sum::<f64>() - e).abs() < 1e-10 * e.abs().max(1.0));
            assert!(groups[1] >= 0.0 && groups[2] >= 0.0);
        }
    }

    #[test]
    fn double_well_records_selected_location() {
        let g = grid();
        let dw = PotentialSpec::DoubleWell { b: 3.0, strength: 0.02 };
        let p = SystemParams::new(1.0, 1.0, 0.2, dw.clone(), dw).unwrap();
        let r = minimize(&p, &g, &SolverOptions::default(), None).unwrap();
        assert!(r.converged);
        assert!(r.centers[0] < 0.0, "{:?}", r.centers);
    }

    #[test]
    fn sandwich_report() {
        let g = grid();
        let p = SystemParams::harmonic(1.47, 1.47, 1.0, 1.0).unwrap();
        let rep = sandwich_check(&p, 2.47, 0.0, &g, 1e-3).unwrap();
        assert!(rep.on_critical_line && rep.holds && rep.upper == 0.0);
        let off = sandwich_check(&p, 2.5, 0.5, &g, 1e-3).unwrap();
        assert!(!off.on_critical_line && !off.holds);
    }
}
