//! The soliton `Q` of `√(-Δ)Q + Q = Q³` and the critical mass `a* = ‖Q‖₂²`.
//!
//! Two independent solvers are provided. [`GroundStateMethod::Flow`] runs a
//! normalized gradient flow that minimizes `‖(-Δ)^{1/4}u‖² + ‖u‖²` at fixed
//! `∫u⁴`; along the dilation orbit this quantity is coercive, and its
//! constrained minimizer is a Gagliardo–Nirenberg extremal solving
//! `√(-Δ)u + u = ν u³`, so `Q = √ν u`. [`GroundStateMethod::FixedPoint`] is a
//! Petviashvili iteration `Q ← S^{3/2} (1+|ξ|)⁻¹ Q³` with the stabilizing
//! factor `S = ⟨Q,(1+|ξ|)Q⟩ / ⟨Q,Q³⟩`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{lp_norm_pow, quartic_integral, quarter_seminorm_sq, Field, Grid1D};
use crate::SolverOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundStateError {
    #[error("no convergence after {iterations} iterations (residual {last_residual:e})")]
    NoConvergence { iterations: usize, last_residual: f64 },
    #[error("iterate lost strict positivity (min sample {min:e})")]
    NegativeValues { min: f64 },
    #[error("quotient denominator vanishes")]
    ZeroDenominator,
    #[error("invalid solver options: {0}")]
    BadOptions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GroundStateMethod {
    #[default]
    Flow,
    FixedPoint,
}

impl std::str::FromStr for GroundStateMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flow" => Ok(Self::Flow),
            "fixedpoint" | "fixed-point" => Ok(Self::FixedPoint),
            other => Err(format!("unknown method `{other}` (expected flow|fixedpoint)")),
        }
    }
}

/// Converged soliton with its critical mass.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub q: Field,
    pub a_star: f64,
    /// `‖√(-Δ)Q + Q - Q³‖∞ / ‖Q‖∞`.
    pub residual: f64,
    pub iterations: usize,
    pub method: GroundStateMethod,
    /// Relative residuals of the last iterations, oldest first.
    pub residual_tail: Vec<f64>,
}

impl GroundState {
    pub fn grid(&self) -> &Grid1D {
        self.q.grid()
    }

    /// Wraps a stored soliton profile (e.g. from the field cache).
    pub fn from_field(q: Field) -> Result<Self, GroundStateError> {
        let min = q.values().iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(GroundStateError::NegativeValues { min });
        }
        let residual = soliton_residual(&q);
        Ok(Self {
            a_star: lp_norm_pow(&q, 2),
            residual,
            iterations: 0,
            method: GroundStateMethod::Flow,
            residual_tail: vec![residual],
            q,
        })
    }

    pub fn pohozaev(&self) -> PohozaevReport {
        PohozaevReport::of(&self.q)
    }
}

/// The three sides of `‖(-Δ)^{1/4}Q‖² = ‖Q‖² = ½∫Q⁴`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PohozaevReport {
    pub kinetic: f64,
    pub mass: f64,
    pub half_quartic: f64,
    /// Largest pairwise relative difference.
    pub max_rel_residual: f64,
}

impl PohozaevReport {
    pub fn of(q: &Field) -> Self {
        let kinetic = quarter_seminorm_sq(q);
        let mass = lp_norm_pow(q, 2);
        let half_quartic = 0.5 * quartic_integral(q);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        let max_rel_residual = rel(kinetic, mass)
            .max(rel(kinetic, half_quartic))
            .max(rel(mass, half_quartic));
        Self {
            kinetic,
            mass,
            half_quartic,
            max_rel_residual,
        }
    }
}

/// `‖√(-Δ)q + q - q³‖∞ / ‖q‖∞`, with the cube taken dealiased.
pub fn soliton_residual(q: &Field) -> f64 {
    let v = q.values();
    let grid = q.grid();
    let lq = grid.sqrt_laplacian(v);
    let q3 = grid.cube(v);
    let r = lq
        .iter()
        .zip(v)
        .zip(&q3)
        .map(|((l, u), c)| (l + u - c).abs())
        .fold(0.0, f64::max);
    r / q.max_abs()
}

/// Default starting profile `1/(1+x²)`.
pub fn default_initial_guess(grid: &Grid1D) -> Field {
    Field::from_fn(grid, |x| 1.0 / (1.0 + x * x))
}

pub fn solve_q(grid: &Grid1D, opts: &SolverOptions) -> Result<GroundState, GroundStateError> {
    solve_q_with(grid, opts, GroundStateMethod::Flow, None)
}

pub fn solve_q_with(
    grid: &Grid1D,
    opts: &SolverOptions,
    method: GroundStateMethod,
    init: Option<&Field>,
) -> Result<GroundState, GroundStateError> {
    if !(opts.tol > 0.0 && opts.tol <= 1e-4) {
        return Err(GroundStateError::BadOptions(format!(
            "tol {} outside (0, 1e-4]",
            opts.tol
        )));
    }
    if opts.max_iter == 0 {
        return Err(GroundStateError::BadOptions("max_iter must be positive".into()));
    }
    let init = match init {
        Some(f) => f.on_grid(grid).map_err(|e| GroundStateError::BadOptions(e.to_string()))?,
        None => default_initial_guess(grid),
    };
    let start = positive_even(init.values(), grid);
    match method {
        GroundStateMethod::Flow => flow(grid, opts, start),
        GroundStateMethod::FixedPoint => petviashvili(grid, opts, start),
    }
}

const TAIL: usize = 32;

fn positive_even(values: &[f64], grid: &Grid1D) -> Vec<f64> {
    (0..grid.n())
        .map(|j| 0.5 * (values[j].abs() + values[grid.mirror(j)].abs()))
        .collect()
}

fn quartic(grid: &Grid1D, u: &[f64]) -> f64 {
    grid.quartic(u)
}

fn action(grid: &Grid1D, u: &[f64]) -> f64 {
    grid.seminorm_sq(u) + grid.integrate(u.iter().map(|v| v * v))
}

fn push_tail(tail: &mut Vec<f64>, r: f64) {
    if tail.len() == TAIL {
        tail.remove(0);
    }
    tail.push(r);
}

fn finish(
    grid: &Grid1D,
    q: Vec<f64>,
    residual: f64,
    iterations: usize,
    method: GroundStateMethod,
    residual_tail: Vec<f64>,
) -> Result<GroundState, GroundStateError> {
    let min = q.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(GroundStateError::NegativeValues { min });
    }
    let q = Field::from_raw(grid, q);
    Ok(GroundState {
        a_star: lp_norm_pow(&q, 2),
        q,
        residual,
        iterations,
        method,
        residual_tail,
    })
}

fn flow(
    grid: &Grid1D,
    opts: &SolverOptions,
    u: Vec<f64>,
) -> Result<GroundState, GroundStateError> {
    let run = gn_flow(grid, opts, u)?;
    finish(grid, run.q, run.residual, run.iterations, GroundStateMethod::Flow, run.tail)
}

struct FlowRun {
    q: Vec<f64>,
    residual: f64,
    iterations: usize,
    tail: Vec<f64>,
}

/// Minimizes `‖(-Δ)^{1/4}u‖² + ‖u‖²` at fixed `∫u⁴`.
fn gn_flow(
    grid: &Grid1D,
    opts: &SolverOptions,
    mut u: Vec<f64>,
) -> Result<FlowRun, GroundStateError> {
    let p0 = quartic(grid, &u);
    let mut h = action(grid, &u);
    let mut tau = opts.dt0.max(1e-3);
    let mut tail = Vec::with_capacity(TAIL);
    let mut last = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let nu = h / p0;
        let u3 = grid.cube(&u);
        let rhs: Vec<f64> = u.iter().zip(&u3).map(|(v, w)| v + tau * nu * w).collect();
        let cand = grid.filter(&rhs, |_, m| 1.0 / (1.0 + tau * (1.0 + m)));
        let mut cand = positive_even(&cand, grid);
        let s = (p0 / quartic(grid, &cand)).powf(0.25);
        cand.iter_mut().for_each(|v| *v *= s);
        let hc = action(grid, &cand);
        if hc > h * (1.0 + 1e-12) {
            tau *= 0.5;
            if tau < 1e-10 {
                break;
            }
            continue;
        }
        u = cand;
        h = hc;
        tau = (tau * 1.1).min(1e4);

        let amp = (h / p0).sqrt();
        let q: Vec<f64> = u.iter().map(|v| amp * v).collect();
        last = soliton_residual(&Field::from_raw(grid, q.clone()));
        push_tail(&mut tail, last);
        if last < opts.tol {
            return Ok(FlowRun {
                q,
                residual: last,
                iterations: iter,
                tail,
            });
        }
    }
    Err(GroundStateError::NoConvergence {
        iterations: opts.max_iter,
        last_residual: last,
    })
}

fn petviashvili(
    grid: &Grid1D,
    opts: &SolverOptions,
    mut u: Vec<f64>,
) -> Result<GroundState, GroundStateError> {
    let mut tail = Vec::with_capacity(TAIL);
    let mut last = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let u3 = grid.cube(&u);
        let num = action(grid, &u);
        let den = grid.quartic(&u);
        if den <= 0.0 {
            return Err(GroundStateError::ZeroDenominator);
        }
        let factor = (num / den).powf(1.5);
        let next = grid.filter(&u3, |_, m| factor / (1.0 + m));
        u = positive_even(&next, grid);
        last = soliton_residual(&Field::from_raw(grid, u.clone()));
        push_tail(&mut tail, last);
        if last < opts.tol {
            return finish(grid, u, last, iter, GroundStateMethod::FixedPoint, tail);
        }
    }
    Err(GroundStateError::NoConvergence {
        iterations: opts.max_iter,
        last_residual: last,
    })
}

/// Weinstein quotient `‖(-Δ)^{1/4}f‖² ‖f‖² / ∫f⁴`; its infimum is `a*/2`.
pub fn gn_quotient(f: &Field) -> Result<f64, GroundStateError> {
    let p = quartic_integral(f);
    if p <= 0.0 {
        return Err(GroundStateError::ZeroDenominator);
    }
    Ok(quarter_seminorm_sq(f) * lp_norm_pow(f, 2) / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayClass {
    /// `x²f(x)` stays bounded: the `|x|⁻²` class.
    Algebraic,
    /// Decays faster than any `|x|⁻²` profile on the box.
    Faster,
    /// `x²f(x)` grows across the window.
    Slower,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    /// `x²|f(x)|` averaged over `x = ±L/2`.
    pub reference: f64,
    /// Largest `x²|f(x)|` over `L/4 ≤ |x| ≤ 3L/4`.
    pub window_max: f64,
    /// Largest `x²|f(x)|` over the outer quarter `|x| ≥ 3L/4`.
    pub outer_max: f64,
    /// `outer_max / reference`.
    pub ratio: f64,
    /// Local power-law exponent `p` of `|f| ~ |x|^{-p}` between `L/4` and `3L/4`.
    pub exponent: f64,
    pub bounded: bool,
    pub class: DecayClass,
}

pub fn verify_decay(gs: &GroundState) -> DecayReport {
    decay_report(&gs.q, 10.0)
}

/// Tail diagnostics of an even profile; `factor` bounds `x²|f|` relative to its value at `L/2`.
pub fn decay_report(f: &Field, factor: f64) -> DecayReport {
    let g = f.grid();
    let l = g.half_length();
    let n = g.n();
    let at = |x: f64| {
        // nearest samples at ±x
        let j = ((x + l) / g.dx()).round() as usize % n;
        let k = g.mirror(j);
        0.5 * (f.values()[j].abs() + f.values()[k].abs())
    };
    let weighted = |j: usize| {
        let x = g.x(j);
        x * x * f.values()[j].abs()
    };
    let reference = (0.25 * l * l) * at(0.5 * l);
    let mut window_max = 0.0_f64;
    let mut outer_max = 0.0_f64;
    for j in 0..n {
        let ax = g.x(j).abs();
        if ax >= 0.25 * l && ax <= 0.75 * l {
            window_max = window_max.max(weighted(j));
        } else if ax > 0.75 * l {
            outer_max = outer_max.max(weighted(j));
        }
    }
    let inner = at(0.25 * l);
    let outer = at(0.75 * l);
    let exponent = if inner > 0.0 && outer > 0.0 {
        (inner / outer).ln() / 3f64.ln()
    } else {
        f64::INFINITY
    };
    let ratio = if reference > 0.0 {
        outer_max / reference
    } else if outer_max == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let bounded = reference > 0.0 && window_max <= factor * reference && outer_max <= factor * reference;
    let class = if exponent > 3.0 {
        DecayClass::Faster
    } else if exponent < 1.5 {
        DecayClass::Slower
    } else {
        DecayClass::Algebraic
    };
    DecayReport {
        reference,
        window_max,
        outer_max,
        ratio,
        exponent,
        bounded,
        class,
    }
}
