//! Closed-form thresholds, the quotient `Γ`, the existence classifier, the
//! trial-function probes and the coupled soliton.
//!
//! With `β⁺ = max(β, 0)`:
//!
//! ```text
//! β_*  = √((a*−a₁)(a*−a₂)),      β** = (a*−a₁)/2 + (a*−a₂)/2
//! κ(t) = a*(1+t²) / (a₁ + a₂t² + 2β⁺t)
//! J    = 2(‖(-Δ)^{1/4}u₁‖² + ‖(-Δ)^{1/4}u₂‖²) / (a₁∫u₁⁴ + a₂∫u₂⁴ + 2β⁺∫u₁²u₂²)
//! ```
//!
//! `Γ` is the infimum of `J` over pairs of unit mass. `J` is invariant under
//! the dilation `u ↦ λ^{1/2}u(λ·)`, which the flow fixes by holding the total
//! kinetic term at one.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constrained::{energy_terms, minimize, potential_floor, ConstrainedError, SystemParams};
use crate::ground_state::GroundState;
use crate::potential::{Potential, PotentialSpec};
use crate::spectral::{
    cross_quartic_integral, dilate, lp_norm_pow, quartic_integral, quarter_seminorm_sq, Field, Grid1D,
    Interpolant, SpectralError,
};
use crate::SolverOptions;

/// Default half-width of the band around `Γ = 1` where no verdict is given.
pub const DEFAULT_GAMMA_BAND: f64 = 0.02;

#[derive(Debug, Error)]
pub enum ThresholdError {
    #[error("kappa denominator is not positive")]
    NonpositiveDenominator,
    #[error("kappa is monotone: limit {limit_at_zero} at 0, {limit_at_infinity} at infinity")]
    NoInteriorMinimum { limit_at_zero: f64, limit_at_infinity: f64 },
    #[error("invalid input: {0}")]
    Precondition(String),
    #[error("quotient flow did not converge")]
    NoConvergence(Box<GammaEstimate>),
    #[error("Gamma increased from {previous} to {next} at beta = {beta}")]
    NonMonotone { beta: f64, previous: f64, next: f64 },
    #[error("field has mass {0:e} outside the box core")]
    SupportTooWide(f64),
    #[error("R·dx = {0} exceeds 1/16")]
    ResolutionTooCoarse(f64),
    #[error("a = beta needs an angle to pick a soliton")]
    SingularCouplings,
    #[error("zero denominator")]
    ZeroDenominator,
    #[error(transparent)]
    Constrained(#[from] ConstrainedError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn precondition(msg: impl Into<String>) -> ThresholdError {
    ThresholdError::Precondition(msg.into())
}

// ---------------------------------------------------------------------------
// Closed forms

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub a_star: f64,
    /// `β_*`; `None` when `a₁ > a*` or `a₂ > a*`.
    pub beta_lower: Option<f64>,
    /// `β**`.
    pub beta_upper: f64,
    /// `√((a*−a₁)/(a*−a₂))`, defined when both factors are positive.
    pub t0: Option<f64>,
}

pub fn compute_thresholds(a1: f64, a2: f64, a_star: f64) -> Thresholds {
    let (d1, d2) = (a_star - a1, a_star - a2);
    Thresholds {
        a_star,
        beta_lower: (d1 >= 0.0 && d2 >= 0.0).then(|| (d1 * d2).sqrt()),
        beta_upper: 0.5 * d1 + 0.5 * d2,
        t0: (d1 > 0.0 && d2 > 0.0).then(|| (d1 / d2).sqrt()),
    }
}

pub fn kappa(t: f64, a1: f64, a2: f64, beta_plus: f64, a_star: f64) -> Result<f64, ThresholdError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(precondition(format!("t = {t} must be positive")));
    }
    let den = a1 + a2 * t * t + 2.0 * beta_plus * t;
    if !(den > 0.0) {
        return Err(ThresholdError::NonpositiveDenominator);
    }
    Ok(a_star * (1.0 + t * t) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaInf {
    pub t_min: f64,
    pub value: f64,
    /// `κ` is constant (`a₁ = a₂`, `β⁺ = 0`); `t_min` is arbitrary.
    pub flat: bool,
}

/// Infimum of `κ` over `t > 0` by golden-section search in `ln t`, polished
/// with Newton steps on the stationarity condition `β⁺t² + (a₁−a₂)t − β⁺ = 0`.
pub fn kappa_inf(a1: f64, a2: f64, beta_plus: f64, a_star: f64) -> Result<KappaInf, ThresholdError> {
    if !(a1 >= 0.0 && a2 >= 0.0 && beta_plus >= 0.0 && a_star > 0.0) || !(a1 + a2 > 0.0) {
        return Err(precondition("kappa_inf needs a1, a2, beta+ >= 0, a1 + a2 > 0, a* > 0"));
    }
    if beta_plus == 0.0 {
        if a1 == a2 {
            return Ok(KappaInf {
                t_min: 1.0,
                value: a_star / a1,
                flat: true,
            });
        }
        return Err(ThresholdError::NoInteriorMinimum {
            limit_at_zero: a_star / a1,
            limit_at_infinity: a_star / a2,
        });
    }
    let f = |s: f64| kappa(s.exp(), a1, a2, beta_plus, a_star).unwrap_or(f64::INFINITY);
    let s = golden_section(f, -80.0, 80.0, 1e-10);
    let mut t = s.exp();
    for _ in 0..4 {
        let p = beta_plus * t * t + (a1 - a2) * t - beta_plus;
        let dp = 2.0 * beta_plus * t + (a1 - a2);
        if dp == 0.0 {
            break;
        }
        let next = t - p / dp;
        if !(next > 0.0) || f(next.ln()) > f(t.ln()) {
            break;
        }
        t = next;
    }
    Ok(KappaInf {
        t_min: t,
        value: kappa(t, a1, a2, beta_plus, a_star)?,
        flat: false,
    })
}

/// Minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// The quotient Γ

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    BoundsOnly,
    Numeric,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaEstimate {
    /// The flow value clamped into `[lower_bound, upper_bound]`, or the
    /// midpoint of the bounds for `BoundsOnly`.
    pub value: f64,
    /// Unclamped best flow value.
    pub raw: Option<f64>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    #[serde(skip)]
    pub minimizing_pair: Option<(Field, Field)>,
    pub method: GammaMethod,
    pub iterations: usize,
    pub residual: f64,
}

/// `(a*/max(a₁+β⁺, a₂+β⁺), 2a*/(a₁+a₂+2β⁺))`.
pub fn gamma_bounds(a1: f64, a2: f64, beta: f64, a_star: f64) -> (f64, f64) {
    let b = beta.max(0.0);
    (a_star / (a1 + b).max(a2 + b), 2.0 * a_star / (a1 + a2 + 2.0 * b))
}

struct Quotient<'a> {
    grid: &'a Grid1D,
    a: [f64; 2],
    b: f64,
}

struct QuotientState {
    j: f64,
    residual: [Vec<f64>; 2],
    el: f64,
}

struct QuotientRun {
    u: [Vec<f64>; 2],
    j: f64,
    el: f64,
    iterations: usize,
    settled: bool,
}

impl Quotient<'_> {
    fn kinetic(&self, u: &[Vec<f64>; 2]) -> f64 {
        self.grid.seminorm_sq(&u[0]) + self.grid.seminorm_sq(&u[1])
    }

    fn state(&self, u: &[Vec<f64>; 2]) -> QuotientState {
        let g = self.grid;
        let r = [g.refine(&u[0]), g.refine(&u[1])];
        let den = g.integrate_fine((0..r[0].len()).map(|k| {
            let (x, y) = (r[0][k] * r[0][k], r[1][k] * r[1][k]);
            self.a[0] * x * x + self.a[1] * y * y + 2.0 * self.b * x * y
        }));
        let j = 2.0 * self.kinetic(u) / den;
        let mut residual: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut el = 0.0_f64;
        for i in 0..2 {
            let (ri, rj) = (&r[i], &r[1 - i]);
            let fine: Vec<f64> = ri
                .iter()
                .zip(rj)
                .map(|(x, y)| x * (self.a[i] * x * x + self.b * y * y))
                .collect();
            let force = g.project(&fine);
            let grad: Vec<f64> = g
                .sqrt_laplacian(&u[i])
                .iter()
                .zip(&force)
                .map(|(h, f)| h - j * f)
                .collect();
            let mass = g.integrate(u[i].iter().map(|v| v * v));
            let nu = g.integrate(grad.iter().zip(&u[i]).map(|(a, b)| a * b)) / mass;
            residual[i] = grad.iter().zip(&u[i]).map(|(a, b)| a - nu * b).collect();
            el = el.max(max_abs(&residual[i]) / max_abs(&u[i]));
        }
        QuotientState { j, residual, el }
    }

    /// Unit masses, then a common dilation so that the kinetic terms sum to one.
    fn normalize(&self, u: &mut [Vec<f64>; 2]) {
        for ui in u.iter_mut() {
            normalize_mass(self.grid, ui);
        }
        let k = self.kinetic(u);
        if (k - 1.0).abs() > 1e-3 {
            for ui in u.iter_mut() {
                let f = Field::from_raw(self.grid, std::mem::take(ui));
                *ui = dilate(&f, 1.0 / k).into_values();
                normalize_mass(self.grid, ui);
            }
        }
    }

    fn run(&self, mut u: [Vec<f64>; 2], opts: &SolverOptions) -> QuotientRun {
        self.normalize(&mut u);
        let mut st = self.state(&u);
        let mut history = vec![st.j];
        let mut tau = opts.dt0;
        let mut iterations = 0;
        let mut settled = false;
        while iterations < opts.max_iter {
            if st.el < opts.tol {
                settled = true;
                break;
            }
            iterations += 1;
            let mut cand = u.clone();
            for i in 0..2 {
                let d = self.grid.filter(&st.residual[i], |_, m| 1.0 / (1.0 + tau * m));
                for (c, dk) in cand[i].iter_mut().zip(&d) {
                    *c -= tau * dk;
                }
            }
            self.normalize(&mut cand);
            let sc = self.state(&cand);
            if sc.j.is_finite() && sc.j <= st.j * (1.0 + 1e-13) {
                u = cand;
                st = sc;
                history.push(st.j);
                tau = (tau * 1.1).min(1e3);
                let h = history.len();
                if h > 50 && history[h - 51] - st.j <= 1e-11 * st.j {
                    settled = true;
                    break;
                }
            } else {
                tau *= 0.5;
                if tau < 1e-12 {
                    settled = true;
                    break;
                }
            }
        }
        QuotientRun {
            u,
            j: st.j,
            el: st.el,
            iterations,
            settled,
        }
    }
}

fn normalize_mass(grid: &Grid1D, u: &mut [f64]) {
    let m = grid.integrate(u.iter().map(|v| v * v));
    let s = 1.0 / m.sqrt();
    u.iter_mut().for_each(|v| *v *= s);
}

fn max_abs(u: &[f64]) -> f64 {
    u.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `Q` sampled on `grid` (spectrally interpolated when the grids differ).
pub fn soliton_on(grid: &Grid1D, gs: &GroundState) -> Field {
    if grid == gs.grid() {
        return gs.q.clone();
    }
    let interp = Interpolant::new(&gs.q);
    Field::from_fn(grid, |x| interp.eval_in_box(x))
}

fn gamma_seeds(grid: &Grid1D, gs: &GroundState) -> Vec<[Vec<f64>; 2]> {
    let q = soliton_on(grid, gs).into_values();
    let wide = Field::from_fn(grid, |x| (-x * x / 18.0).exp()).into_values();
    vec![[q.clone(), q.clone()], [q.clone(), wide.clone()], [wide, q]]
}

/// Numeric `Γ` for the couplings of `params` (the traps play no role).
pub fn gamma_estimate(
    params: &SystemParams,
    grid: &Grid1D,
    gs: &GroundState,
    opts: &SolverOptions,
) -> Result<GammaEstimate, ThresholdError> {
    gamma_estimate_from(params, grid, gs, opts, None)
}

/// Like [`gamma_estimate`], with an extra starting pair (e.g. the minimizer
/// at a nearby parameter point).
pub fn gamma_estimate_from(
    params: &SystemParams,
    grid: &Grid1D,
    gs: &GroundState,
    opts: &SolverOptions,
    warm: Option<&(Field, Field)>,
) -> Result<GammaEstimate, ThresholdError> {
    let (a1, a2, b) = (params.a1, params.a2, params.beta_plus());
    if !(a1 >= 0.0 && a2 >= 0.0 && a1 + a2 + 2.0 * b > 0.0) {
        return Err(precondition("Gamma needs a1 + a2 + 2 beta+ > 0"));
    }
    let (lower_bound, upper_bound) = gamma_bounds(a1, a2, params.beta, gs.a_star);
    let quotient = Quotient {
        grid,
        a: [a1, a2],
        b,
    };
    let mut seeds = gamma_seeds(grid, gs);
    if let Some((w1, w2)) = warm {
        seeds.push([w1.on_grid(grid)?.into_values(), w2.on_grid(grid)?.into_values()]);
    }
    let mut best: Option<QuotientRun> = None;
    let mut fallback: Option<QuotientRun> = None;
    for seed in seeds {
        let run = quotient.run(seed, opts);
        let slot = if run.settled { &mut best } else { &mut fallback };
        if slot.as_ref().map_or(true, |b| run.j < b.j) {
            *slot = Some(run);
        }
    }
    match best {
        Some(run) => {
            let [u1, u2] = run.u;
            Ok(GammaEstimate {
                value: run.j.clamp(lower_bound, upper_bound),
                raw: Some(run.j),
                lower_bound,
                upper_bound,
                minimizing_pair: Some((Field::new(grid, u1)?, Field::new(grid, u2)?)),
                method: GammaMethod::Numeric,
                iterations: run.iterations,
                residual: run.el,
            })
        }
        None => {
            let run = fallback.expect("at least one seed");
            Err(ThresholdError::NoConvergence(Box::new(GammaEstimate {
                value: 0.5 * (lower_bound + upper_bound),
                raw: Some(run.j),
                lower_bound,
                upper_bound,
                minimizing_pair: None,
                method: GammaMethod::BoundsOnly,
                iterations: run.iterations,
                residual: run.el,
            })))
        }
    }
}

/// A bounds-only estimate, for callers that skip the flow.
pub fn gamma_bounds_only(params: &SystemParams, a_star: f64) -> GammaEstimate {
    let (lower_bound, upper_bound) = gamma_bounds(params.a1, params.a2, params.beta, a_star);
    GammaEstimate {
        value: 0.5 * (lower_bound + upper_bound),
        raw: None,
        lower_bound,
        upper_bound,
        minimizing_pair: None,
        method: GammaMethod::BoundsOnly,
        iterations: 0,
        residual: f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub difference: f64,
    pub bound: f64,
    /// Relative allowance on `bound` for discretization error.
    pub slack: f64,
    pub holds: bool,
}

/// Checks `|Γ(p) − Γ(q)| ≤ 12a*|p − q| / ((p₁+p₂+2p₃)(q₁+q₂+2q₃))` with the
/// Euclidean norm on `(a₁, a₂, β)`.
pub fn lipschitz_check(p: [f64; 3], q: [f64; 3], gammas: [f64; 2], a_star: f64) -> LipschitzReport {
    let dist = p.iter().zip(&q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s = |v: [f64; 3]| v[0] + v[1] + 2.0 * v[2];
    let bound = 12.0 * a_star * dist / (s(p) * s(q));
    let difference = (gammas[0] - gammas[1]).abs();
    let slack = 0.05;
    LipschitzReport {
        difference,
        bound,
        slack,
        holds: difference <= bound * (1.0 + slack) + 4.0 * f64::EPSILON * gammas[0].abs().max(gammas[1].abs()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaCrossing {
    /// First `β` in `[β_*, β**]` where `Γ` reaches one.
    pub beta: f64,
    pub beta_lower: f64,
    pub beta_upper: f64,
    /// `Γ` stayed above one on `[β_*, β**)`.
    pub no_crossing: bool,
    /// `(β, Γ)` pairs evaluated, in order.
    pub scan: Vec<(f64, f64)>,
}

/// Locates the first `β ≥ β_*` with `Γ(a₁, a₂, β) = 1` by a coarse scan
/// followed by bisection to `1e-6·a*`.
pub fn find_gamma_crossing(
    a1: f64,
    a2: f64,
    gs: &GroundState,
    grid: &Grid1D,
    opts: &SolverOptions,
) -> Result<GammaCrossing, ThresholdError> {
    let a_star = gs.a_star;
    if !(a1 > 0.0 && a2 > 0.0 && a1 < a_star && a2 < a_star) || a1 == a2 {
        return Err(precondition("crossing needs 0 < a1 != a2 < a*"));
    }
    let th = compute_thresholds(a1, a2, a_star);
    let lo = th.beta_lower.expect("a_i < a*");
    let hi = th.beta_upper;
    if (a1 - a2).abs() > 2.0 * lo {
        return Err(precondition("crossing needs |a1 - a2| <= 2 beta_*"));
    }
    let base = SystemParams::new(a1, a2, lo, PotentialSpec::Flat, PotentialSpec::Flat)?.with_edge_min(0.0);
    let mut warm: Option<(Field, Field)> = None;
    let mut scan = Vec::new();
    let eval = |beta: f64, warm: &mut Option<(Field, Field)>| -> Result<f64, ThresholdError> {
        let p = base.with_couplings(a1, a2, beta)?;
        let est = gamma_estimate_from(&p, grid, gs, opts, warm.as_ref())?;
        *warm = est.minimizing_pair.clone();
        Ok(est.value)
    };

    const STEPS: usize = 6;
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for k in 0..=STEPS {
        let beta = lo + (hi - lo) * k as f64 / STEPS as f64;
        let g = eval(beta, &mut warm)?;
        scan.push((beta, g));
        if let Some((_, gp)) = prev {
            if g > gp * (1.0 + 1e-6) {
                return Err(ThresholdError::NonMonotone {
                    beta,
                    previous: gp,
                    next: g,
                });
            }
        }
        if g <= 1.0 {
            bracket = Some((prev.map_or(lo, |p| p.0), beta));
            break;
        }
        prev = Some((beta, g));
    }
    let (mut left, mut right) = bracket.unwrap_or((hi, hi));
    while right - left > 1e-6 * a_star {
        let mid = 0.5 * (left + right);
        let g = eval(mid, &mut warm)?;
        scan.push((mid, g));
        if g > 1.0 {
            left = mid;
        } else {
            right = mid;
        }
    }
    let beta = right.max(lo + f64::EPSILON * a_star).min(hi);
    Ok(GammaCrossing {
        beta,
        beta_lower: lo,
        beta_upper: hi,
        no_crossing: hi - beta <= 1e-6 * a_star,
        scan,
    })
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Exists,
    NotExists,
    ExistsNearBetaLower,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Exists => "Exists",
            Verdict::NotExists => "NotExists",
            Verdict::ExistsNearBetaLower => "ExistsNearBetaLower",
            Verdict::Indeterminate => "Indeterminate",
        })
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Exists" => Ok(Verdict::Exists),
            "NotExists" => Ok(Verdict::NotExists),
            "ExistsNearBetaLower" => Ok(Verdict::ExistsNearBetaLower),
            "Indeterminate" => Ok(Verdict::Indeterminate),
            other => Err(format!("unknown verdict `{other}`")),
        }
    }
}

/// Everything the decision rules look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleInputs {
    pub a1: f64,
    pub a2: f64,
    pub beta: f64,
    pub a_star: f64,
    /// Numeric `Γ`, if computed.
    pub gamma: Option<f64>,
    /// `min(V₁ + V₂)`, needed on the critical diagonal.
    pub v_floor: Option<f64>,
    /// Numeric ground-state energy on the critical diagonal.
    pub e_hat: Option<f64>,
    pub gamma_band: f64,
}

/// Whether `a₁ = a₂ = a* − β` with `0 < β < a*`, up to round-off.
pub fn on_critical_diagonal(a1: f64, a2: f64, beta: f64, a_star: f64) -> bool {
    let tol = 1e-9 * a_star;
    (a1 - a2).abs() <= tol && (a1 + beta - a_star).abs() <= tol && beta > 0.0 && beta < a_star
}

/// The rule table, in priority order. Pure, so a stored row can be re-checked.
pub fn decide(r: &RuleInputs) -> (Verdict, &'static str) {
    let th = compute_thresholds(r.a1, r.a2, r.a_star);
    if r.a1 > r.a_star || r.a2 > r.a_star {
        return (Verdict::NotExists, "Thm 1.1(ii): a_i > a*");
    }
    if r.beta > th.beta_upper && !on_critical_diagonal(r.a1, r.a2, r.beta, r.a_star) {
        return (Verdict::NotExists, "Thm 1.1(ii): beta > beta**");
    }
    let lower = th.beta_lower.expect("a_i <= a*");
    if r.a1 < r.a_star && r.a2 < r.a_star && r.beta < lower && !on_critical_diagonal(r.a1, r.a2, r.beta, r.a_star) {
        return (Verdict::Exists, "Thm 1.1(i)");
    }
    if on_critical_diagonal(r.a1, r.a2, r.beta, r.a_star) {
        return match (r.v_floor, r.e_hat) {
            (Some(f), _) if f <= 1e-12 => (Verdict::NotExists, "Thm 1.3(i)"),
            (Some(f), Some(e)) if e < f - 1e-6 * f.max(1.0) => (Verdict::Exists, "Thm 1.3(ii)"),
            (Some(_), Some(_)) => (Verdict::Indeterminate, "Thm 1.3(ii): energy not below floor"),
            _ => (Verdict::Indeterminate, "Thm 1.3: trap data missing"),
        };
    }
    let Some(g) = r.gamma else {
        return (Verdict::Indeterminate, "Gamma unavailable");
    };
    let window = r.a1 != r.a2
        && r.a1 > 0.0
        && r.a2 > 0.0
        && r.a1 < r.a_star
        && r.a2 < r.a_star
        && (r.a1 - r.a2).abs() <= 2.0 * lower
        && r.beta >= lower
        && r.beta <= th.beta_upper;
    if g > 1.0 + r.gamma_band {
        if window {
            (Verdict::ExistsNearBetaLower, "Thm 1.2")
        } else {
            (Verdict::Exists, "Thm 2.4(i)")
        }
    } else if g < 1.0 - r.gamma_band {
        (Verdict::NotExists, "Thm 2.4(ii)")
    } else {
        (Verdict::Indeterminate, "Thm 2.4: Gamma within band of 1")
    }
}

/// The `Γ` value the rules may use: numeric values as they are, bounds only
/// when they clear the band on their own.
pub fn gamma_for_rules(method: GammaMethod, value: f64, lower: f64, upper: f64, band: f64) -> Option<f64> {
    match method {
        GammaMethod::Numeric => Some(value),
        GammaMethod::BoundsOnly if lower > 1.0 + band => Some(lower),
        GammaMethod::BoundsOnly if upper < 1.0 - band => Some(upper),
        GammaMethod::BoundsOnly => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    pub gamma_band: f64,
    /// Run the quotient flow even when an analytic rule decides.
    pub always_gamma: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            gamma_band: DEFAULT_GAMMA_BAND,
            always_gamma: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub rule: String,
    pub thresholds: Thresholds,
    pub gamma: Option<GammaEstimate>,
    pub critical: Option<CriticalEnergy>,
    pub details: BTreeMap<String, f64>,
}

pub fn classify(
    params: &SystemParams,
    gs: &GroundState,
    grid: &Grid1D,
    opts: &SolverOptions,
    copts: &ClassifyOptions,
) -> Result<Classification, ThresholdError> {
    params.validate()?;
    let a_star = gs.a_star;
    let (a1, a2, beta) = (params.a1, params.a2, params.beta);
    let thresholds = compute_thresholds(a1, a2, a_star);
    let mut details = BTreeMap::new();
    details.insert("a_star".to_string(), a_star);
    details.insert("beta_upper".to_string(), thresholds.beta_upper);
    if let Some(b) = thresholds.beta_lower {
        details.insert("beta_lower".to_string(), b);
    }

    let diagonal = on_critical_diagonal(a1, a2, beta, a_star);
    let analytic = a1 > a_star
        || a2 > a_star
        || (!diagonal && beta > thresholds.beta_upper)
        || (!diagonal && thresholds.beta_lower.is_some_and(|l| a1 < a_star && a2 < a_star && beta < l));
    let gamma = if diagonal || (analytic && !copts.always_gamma) {
        None
    } else {
        Some(match gamma_estimate(params, grid, gs, opts) {
            Ok(g) => g,
            Err(ThresholdError::NoConvergence(g)) => *g,
            Err(e) => return Err(e),
        })
    };
    if let Some(g) = &gamma {
        details.insert("gamma".to_string(), g.value);
        details.insert("gamma_lower".to_string(), g.lower_bound);
        details.insert("gamma_upper".to_string(), g.upper_bound);
    }

    let (critical, v_floor) = if diagonal {
        let c = critical_energy(params, grid, gs, opts)?;
        details.insert("v_floor".to_string(), c.floor);
        details.insert("e_hat".to_string(), c.estimate);
        let f = c.floor;
        (Some(c), Some(f))
    } else {
        (None, None)
    };
    let band = copts.gamma_band;
    let gamma_for_rules = gamma
        .as_ref()
        .and_then(|g| gamma_for_rules(g.method, g.value, g.lower_bound, g.upper_bound, band));
    let (verdict, rule) = decide(&RuleInputs {
        a1,
        a2,
        beta,
        a_star,
        gamma: gamma_for_rules,
        v_floor,
        e_hat: critical.as_ref().map(|c| c.estimate),
        gamma_band: band,
    });
    Ok(Classification {
        verdict,
        rule: rule.to_string(),
        thresholds,
        gamma,
        critical,
        details,
    })
}

/// Numeric ground-state energy on the critical diagonal.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalEnergy {
    /// Converged flow energy, if the flow converged.
    pub flow: Option<f64>,
    /// Least energy of the concentrating family `λ^{1/2}Q(λ(x−x₀))/‖Q‖`.
    pub trial: f64,
    pub trial_lambda: f64,
    /// Concentration point `x₀ = argmin(V₁ + V₂)`.
    pub center: f64,
    /// `min(flow, trial)`.
    pub estimate: f64,
    /// `min(V₁ + V₂)` on the grid.
    pub floor: f64,
}

/// Energy of both components equal to `λ^{1/2}Q(λ(x−x₀))/‖Q‖`, using
/// `‖(-Δ)^{1/4}Q‖² = ‖Q‖² = ½∫Q⁴`:
/// `λ(2 − (a₁+a₂+2β)/a*) + Σᵢ ∫Vᵢ(x₀ + y/λ) Q(y)² dy / a*`.
pub fn soliton_family_energy(
    params: &SystemParams,
    pots: &[Potential; 2],
    gs: &GroundState,
    x0: f64,
    lambda: f64,
) -> f64 {
    let qg = gs.grid();
    let q = gs.q.values();
    let pot = qg.integrate(
        qg.xs()
            .iter()
            .zip(q)
            .map(|(y, qv)| (pots[0].eval(x0 + y / lambda) + pots[1].eval(x0 + y / lambda)) * qv * qv),
    ) / gs.a_star;
    lambda * (2.0 - (params.a1 + params.a2 + 2.0 * params.beta) / gs.a_star) + pot
}

pub fn critical_energy(
    params: &SystemParams,
    grid: &Grid1D,
    gs: &GroundState,
    opts: &SolverOptions,
) -> Result<CriticalEnergy, ThresholdError> {
    let pots = [
        Potential::resolve(&params.v1, grid, 0.0).map_err(ConstrainedError::from)?,
        Potential::resolve(&params.v2, grid, 0.0).map_err(ConstrainedError::from)?,
    ];
    let floor = potential_floor(params, grid)?;
    let xs = grid.xs();
    let (center, _) = xs
        .iter()
        .map(|&x| (x, pots[0].eval(x) + pots[1].eval(x)))
        .fold((0.0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
    let (mut trial, mut trial_lambda) = (f64::INFINITY, 1.0);
    for k in 0..=100 {
        let lambda = 10f64.powf(-1.0 + 5.0 * k as f64 / 100.0);
        let e = soliton_family_energy(params, &pots, gs, center, lambda);
        if e < trial {
            trial = e;
            trial_lambda = lambda;
        }
    }
    let flow = match minimize(params, grid, opts, None) {
        Ok(r) => Some(r.energy),
        Err(ConstrainedError::DivergingEnergy(_)) | Err(ConstrainedError::NoConvergence(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(CriticalEnergy {
        flow,
        trial,
        trial_lambda,
        center,
        estimate: flow.map_or(trial, |f| f.min(trial)),
        floor,
    })
}

// ---------------------------------------------------------------------------
// Probes

/// Smooth cutoff: one on `|x| ≤ 1/2`, zero on `|x| ≥ 1`, built from
/// `exp(−1/t)` so it is `C^∞`.
pub fn cutoff(x: f64) -> f64 {
    let h = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let r = x.abs();
    let (a, b) = (h(1.0 - r), h(r - 0.5));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TracePoint {
    /// `λ` or `R`.
    pub param: f64,
    pub energy: f64,
    /// The same energy from spectrally resampled fields, where resolvable.
    pub resampled: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Scaling,
    PsiR,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyTrace {
    pub kind: TraceKind,
    pub points: Vec<TracePoint>,
    /// Least-squares slope of energy against the parameter over the upper half.
    pub slope: f64,
    /// Exact linear coefficient of the family, when known.
    pub analytic_slope: Option<f64>,
    pub monotone_decreasing: bool,
}

impl EnergyTrace {
    fn new(kind: TraceKind, points: Vec<TracePoint>, analytic_slope: Option<f64>) -> Self {
        let monotone_decreasing = points.windows(2).all(|w| w[1].energy < w[0].energy);
        let tail = &points[points.len() / 2..];
        let xs: Vec<f64> = tail.iter().map(|p| p.param).collect();
        let ys: Vec<f64> = tail.iter().map(|p| p.energy).collect();
        let (slope, _) = weighted_line(&xs, &ys, &vec![1.0; xs.len()]);
        Self {
            kind,
            points,
            slope,
            analytic_slope,
            monotone_decreasing,
        }
    }

    /// Decreasing on the whole range with a negative fitted slope.
    pub fn diverges(&self) -> bool {
        self.points.len() >= 2 && self.monotone_decreasing && self.slope < 0.0
    }

    /// Two-column CSV `lambda_or_R,energy_or_term`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lambda_or_R", "energy_or_term"]).expect("in-memory write");
        for p in &self.points {
            w.write_record([format!("{:.16e}", p.param), format!("{:.16e}", p.energy)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
    }
}

/// Weighted least-squares line `y ≈ slope·x + intercept`.
pub fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64) {
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxy: f64 = (0..xs.len()).map(|k| ws[k] * (xs[k] - mx) * (ys[k] - my)).sum();
    let sxx: f64 = (0..xs.len()).map(|k| ws[k] * (xs[k] - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Energy along `λ^{1/2}uᵢ(λx)`, `λ ≥ 1`.
///
/// The family is evaluated through its exact scaling laws: kinetic and
/// quartic terms are multiplied by `λ` and the trap term becomes
/// `∫Vᵢ(y/λ)uᵢ(y)²dy`. Where the compressed fields are still resolved on the
/// grid, the energy of the spectrally resampled pair is reported alongside.
pub fn scaling_probe(
    u1: &Field,
    u2: &Field,
    params: &SystemParams,
    lambdas: &[f64],
) -> Result<EnergyTrace, ThresholdError> {
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 1.0 && l.is_finite())) {
        return Err(precondition("scaling factors must be finite and >= 1"));
    }
    let grid = u1.grid();
    let half = 0.5 * grid.half_length();
    let mut outside = 0.0_f64;
    let mut width = 0.0_f64;
    for u in [u1, u2] {
        let total = lp_norm_pow(u, 2);
        let peak = u.max_abs();
        let out = grid.integrate(
            grid.xs()
                .iter()
                .zip(u.values())
                .map(|(x, v)| if x.abs() > half { v * v } else { 0.0 }),
        );
        outside = outside.max(out / total.max(f64::MIN_POSITIVE));
        for (x, v) in grid.xs().iter().zip(u.values()) {
            if v.abs() > 1e-14 * peak {
                width = width.max(x.abs());
            }
        }
    }
    if outside > 1e-12 {
        return Err(ThresholdError::SupportTooWide(outside));
    }
    let t = energy_terms(u1, u2, params)?;
    let pots = [
        Potential::resolve(&params.v1, grid, 0.0).map_err(ConstrainedError::from)?,
        Potential::resolve(&params.v2, grid, 0.0).map_err(ConstrainedError::from)?,
    ];
    let kin = t.kinetic[0] + t.kinetic[1];
    let inter = 0.5 * params.a1 * t.quartic[0] + 0.5 * params.a2 * t.quartic[1] + params.beta * t.cross;
    let xs = grid.xs();
    let band = |u: &Field, lambda: f64| {
        let c = grid.forward(u.values());
        let n = grid.n() as f64;
        let (mut hi, mut all) = (0.0, 0.0);
        for (k, ck) in c.iter().enumerate() {
            let kk = if (k as f64) < n / 2.0 { k as f64 } else { k as f64 - n };
            all += ck.norm_sqr();
            if kk.abs() * lambda >= n / 2.0 {
                hi += ck.norm_sqr();
            }
        }
        hi / all
    };
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let pot: f64 = [u1, u2]
            .iter()
            .zip(&pots)
            .map(|(u, v)| grid.integrate(xs.iter().zip(u.values()).map(|(x, w)| v.eval(x / lambda) * w * w)))
            .sum();
        let energy = lambda * (kin - inter) + pot;
        let resampled = if lambda * width < grid.half_length() && band(u1, lambda).max(band(u2, lambda)) < 1e-14 {
            let (d1, d2) = (dilate(u1, lambda), dilate(u2, lambda));
            let e = energy_terms(&d1, &d2, params)?;
            Some(e.total(params.a1, params.a2, params.beta))
        } else {
            None
        };
        points.push(TracePoint {
            param: lambda,
            energy,
            resampled,
        });
    }
    Ok(EnergyTrace::new(TraceKind::Scaling, points, Some(kin - inter)))
}

/// `(K, P, ∫uᵢ²)` quotient value `ρ₀ = ΣK / (Σ(aᵢ/2)∫uᵢ⁴ + β∫u₁²u₂²)`.
pub fn scaling_quotient(u1: &Field, u2: &Field, params: &SystemParams) -> Result<f64, ThresholdError> {
    let t = energy_terms(u1, u2, params)?;
    let inter = 0.5 * params.a1 * t.quartic[0] + 0.5 * params.a2 * t.quartic[1] + params.beta * t.cross;
    if !(inter > 0.0) {
        return Err(ThresholdError::ZeroDenominator);
    }
    Ok((t.kinetic[0] + t.kinetic[1]) / inter)
}

/// A normalized truncated soliton: `Q(x)φ(2x/L)`, unit mass, on the grid of `gs`.
pub fn truncated_soliton(gs: &GroundState) -> Field {
    let l = gs.grid().half_length();
    let f = Field::from_fn(gs.grid(), |x| cutoff(2.0 * x / l));
    let v = gs.q.values().iter().zip(f.values()).map(|(q, c)| q * c).collect();
    Field::from_raw(gs.grid(), v).normalized().expect("positive soliton")
}

#[derive(Debug, Clone)]
pub struct TrialFunction {
    pub field: Field,
    /// Normalization constant `A_R²`.
    pub a_r_sq: f64,
    pub r: f64,
    pub x0: f64,
}

/// `A_R R^{1/2}/‖Q‖ φ(x−x₀) Q(R(x−x₀))` with unit mass, sampled on `grid`.
pub fn trial_psi_r(grid: &Grid1D, gs: &GroundState, x0: f64, r: f64) -> Result<TrialFunction, ThresholdError> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(precondition(format!("R = {r} must exceed 1")));
    }
    if !(x0.abs() + 1.0 < grid.half_length()) {
        return Err(precondition(format!("x0 = {x0} leaves the cutoff outside the box")));
    }
    if r > gs.grid().half_length() {
        return Err(precondition(format!("R = {r} exceeds the soliton box half-length")));
    }
    // One grid step must stay below 1/16 of the soliton's unit length scale.
    let rdx = r * grid.dx();
    if rdx > 1.0 / 16.0 {
        return Err(ThresholdError::ResolutionTooCoarse(rdx));
    }
    let interp = Interpolant::new(&gs.q);
    let scale = r.sqrt() / gs.a_star.sqrt();
    let raw = Field::from_fn(grid, |x| {
        let c = cutoff(x - x0);
        if c == 0.0 {
            0.0
        } else {
            scale * c * interp.eval_in_box(r * (x - x0))
        }
    });
    let mass = lp_norm_pow(&raw, 2);
    let a_r_sq = 1.0 / mass;
    Ok(TrialFunction {
        field: raw.scaled(a_r_sq.sqrt()),
        a_r_sq,
        r,
        x0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PsiRFit {
    pub rs: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub quartic: Vec<f64>,
    pub a_r_sq: Vec<f64>,
    /// Weighted slope of the kinetic term (weights `R³`).
    pub kinetic_slope: f64,
    /// Weighted slope of the quartic term (weights `R⁴`).
    pub quartic_slope: f64,
}

pub fn psi_r_fit(grid: &Grid1D, gs: &GroundState, x0: f64, rs: &[f64]) -> Result<PsiRFit, ThresholdError> {
    if rs.len() < 2 {
        return Err(precondition("need at least two R values"));
    }
    let mut fit = PsiRFit {
        rs: rs.to_vec(),
        kinetic: Vec::new(),
        quartic: Vec::new(),
        a_r_sq: Vec::new(),
        kinetic_slope: 0.0,
        quartic_slope: 0.0,
    };
    for &r in rs {
        let t = trial_psi_r(grid, gs, x0, r)?;
        fit.kinetic.push(quarter_seminorm_sq(&t.field));
        fit.quartic.push(quartic_integral(&t.field));
        fit.a_r_sq.push(t.a_r_sq);
    }
    let w3: Vec<f64> = rs.iter().map(|r| r.powi(3)).collect();
    let w4: Vec<f64> = rs.iter().map(|r| r.powi(4)).collect();
    fit.kinetic_slope = weighted_line(rs, &fit.kinetic, &w3).0;
    fit.quartic_slope = weighted_line(rs, &fit.quartic, &w4).0;
    Ok(fit)
}

/// Which components of a `ψ_R` probe concentrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiRMode {
    /// Component `i` (0 or 1) concentrates at a minimum of its trap; the
    /// other is a fixed unit Gaussian at a minimum of its own trap.
    Single(usize),
    /// Both components concentrate at a minimum of `V₁ + V₂`.
    Pair,
}

/// Energy of the `ψ_R` family for large `R`, from its exact scaling laws.
///
/// With `g_R(y) = A_R φ(y/R) Q(y)/‖Q‖` on the soliton grid, `ψ_R` has kinetic
/// term `R·K(g_R)`, quartic term `R·∫g_R⁴` and trap term
/// `∫V(x₀ + y/R) g_R(y)² dy`, so `R` is not limited by the physical grid.
pub fn psi_r_trace(
    params: &SystemParams,
    grid: &Grid1D,
    gs: &GroundState,
    rs: &[f64],
    mode: PsiRMode,
) -> Result<EnergyTrace, ThresholdError> {
    if rs.is_empty() || rs.iter().any(|r| !(*r > 1.0 && r.is_finite())) {
        return Err(precondition("R values must be finite and > 1"));
    }
    let pots = [
        Potential::resolve(&params.v1, grid, 0.0).map_err(ConstrainedError::from)?,
        Potential::resolve(&params.v2, grid, 0.0).map_err(ConstrainedError::from)?,
    ];
    let qg = gs.grid();
    let ys = qg.xs();
    let a = [params.a1, params.a2];
    let first_min = |p: &Potential| p.minimizers().first().copied().unwrap_or(0.0);
    let center = match mode {
        PsiRMode::Single(i) if i < 2 => first_min(&pots[i]),
        PsiRMode::Single(i) => return Err(precondition(format!("component {i} out of range"))),
        PsiRMode::Pair => {
            let xs = grid.xs();
            xs.iter()
                .map(|&x| (x, pots[0].eval(x) + pots[1].eval(x)))
                .fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
                .0
        }
    };
    // The spectator Gaussian for single-component probes.
    let spectator = match mode {
        PsiRMode::Single(i) => {
            let j = 1 - i;
            let c = first_min(&pots[j]);
            let nu = Field::from_fn(grid, |x| PI.powf(-0.25) * (-0.5 * (x - c).powi(2)).exp());
            let e = quarter_seminorm_sq(&nu)
                + grid.integrate(pots[j].values().iter().zip(nu.values()).map(|(v, w)| v * w * w))
                - 0.5 * a[j] * quartic_integral(&nu);
            Some((c, e))
        }
        PsiRMode::Pair => None,
    };
    let mut points = Vec::with_capacity(rs.len());
    let mut analytic = 0.0;
    for &r in rs {
        let g = Field::from_raw(
            qg,
            ys.iter().zip(gs.q.values()).map(|(y, q)| cutoff(y / r) * q).collect(),
        )
        .normalized()
        .expect("positive soliton");
        let k = quarter_seminorm_sq(&g);
        let p = quartic_integral(&g);
        let gv = g.values();
        let trap = |v: &Potential| qg.integrate(ys.iter().zip(gv).map(|(y, w)| v.eval(center + y / r) * w * w));
        let energy = match (mode, spectator) {
            (PsiRMode::Single(i), Some((c, e_nu))) => {
                let cross = qg.integrate(
                    ys.iter()
                        .zip(gv)
                        .map(|(y, w)| w * w * PI.powf(-0.5) * (-(center + y / r - c).powi(2)).exp()),
                );
                analytic = k - 0.5 * a[i] * p;
                r * analytic + trap(&pots[i]) + e_nu - params.beta * cross
            }
            _ => {
                analytic = 2.0 * k - 0.5 * (a[0] + a[1] + 2.0 * params.beta) * p;
                r * analytic + trap(&pots[0]) + trap(&pots[1])
            }
        };
        points.push(TracePoint {
            param: r,
            energy,
            resampled: None,
        });
    }
    Ok(EnergyTrace::new(TraceKind::PsiR, points, Some(analytic)))
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// A trial-family trace showing that the energy is unbounded below, for
/// parameter points where an analytic non-existence rule applies.
pub fn divergence_probe(
    params: &SystemParams,
    grid: &Grid1D,
    gs: &GroundState,
) -> Result<Option<EnergyTrace>, ThresholdError> {
    let a_star = gs.a_star;
    let th = compute_thresholds(params.a1, params.a2, a_star);
    let mode = if params.a1 > a_star || params.a2 > a_star {
        PsiRMode::Single(if params.a1 >= params.a2 { 0 } else { 1 })
    } else if params.beta > th.beta_upper {
        PsiRMode::Pair
    } else {
        return Ok(None);
    };
    let rs = logspace(2.0, 1e3, 16);
    psi_r_trace(params, grid, gs, &rs, mode).map(Some)
}

// ---------------------------------------------------------------------------
// Coupled soliton

#[derive(Debug, Clone, Serialize)]
pub struct CoupledSoliton {
    pub k: f64,
    pub s: f64,
    pub theta: Option<f64>,
    #[serde(skip)]
    pub u0: Field,
    #[serde(skip)]
    pub v0: Field,
    pub rho1: f64,
    /// `max ‖√(-Δ)w + w − a w³ − β w'²w‖∞` over both equations.
    pub system_residual: f64,
    /// `|∫(u²+v²) − ½∫(au⁴ + av⁴ + 2βu²v²)| / ∫(u²+v²)`.
    pub pohozaev_residual: f64,
    /// `max(|ak + βs − 1|, |as + βk − 1|)`.
    pub linear_residual: f64,
    pub p_value: f64,
}

/// `(√k Q, √s Q)` with `ak + βs = as + βk = 1`, or for `a = β` the family
/// `(Q sinθ, Q cosθ)/√a`.
pub fn coupled_soliton(a: f64, beta: f64, gs: &GroundState, theta: Option<f64>) -> Result<CoupledSoliton, ThresholdError> {
    if !(a > 0.0 && beta > 0.0 && a.is_finite() && beta.is_finite()) {
        return Err(precondition("coupled soliton needs a, beta > 0"));
    }
    let q = &gs.q;
    let (k, s, u0, v0, theta) = if (a - beta).abs() <= 1e-14 * a {
        let th = theta.ok_or(ThresholdError::SingularCouplings)?;
        if !(th > 0.0 && th < 2.0 * PI) {
            return Err(precondition(format!("theta = {th} outside (0, 2 pi)")));
        }
        let (sn, cs) = th.sin_cos();
        let amp = 1.0 / a.sqrt();
        (sn * sn / a, cs * cs / a, q.scaled(amp * sn), q.scaled(amp * cs), Some(th))
    } else {
        // Cramer's rule on [[a, β], [β, a]]·(k, s) = (1, 1).
        let det = a * a - beta * beta;
        let k = (a - beta) / det;
        let s = (a - beta) / det;
        if !(k > 0.0) {
            return Err(precondition("the linear system has no positive solution"));
        }
        (k, s, q.scaled(k.sqrt()), q.scaled(s.sqrt()), None)
    };
    let g = q.grid();
    let eq = |w: &Field, other: &Field| -> f64 {
        let rw = g.refine(w.values());
        let ro = g.refine(other.values());
        let fine: Vec<f64> = rw.iter().zip(&ro).map(|(x, y)| x * (a * x * x + beta * y * y)).collect();
        let n = g.project(&fine);
        let h = g.sqrt_laplacian(w.values());
        h.iter()
            .zip(w.values())
            .zip(&n)
            .map(|((h, w), n)| (h + w - n).abs())
            .fold(0.0, f64::max)
    };
    let system_residual = eq(&u0, &v0).max(eq(&v0, &u0));
    let mass = lp_norm_pow(&u0, 2) + lp_norm_pow(&v0, 2);
    let rhs = 0.5 * (a * quartic_integral(&u0) + a * quartic_integral(&v0) + 2.0 * beta * cross_quartic_integral(&u0, &v0)?);
    let linear_residual = (a * k + beta * s - 1.0).abs().max((a * s + beta * k - 1.0).abs());
    let p_value = p_functional(&u0, &v0, a)?;
    Ok(CoupledSoliton {
        k,
        s,
        theta,
        rho1: 0.5 * gs.a_star * (k + s),
        system_residual,
        pohozaev_residual: (mass - rhs).abs() / mass,
        linear_residual,
        p_value,
        u0,
        v0,
    })
}

/// `(ΣK)(Σ∫uᵢ²) / (a∫(u₁⁴ + u₂⁴ + 2u₁²u₂²))`.
pub fn p_functional(u1: &Field, u2: &Field, a: f64) -> Result<f64, ThresholdError> {
    let den = a * (quartic_integral(u1) + quartic_integral(u2) + 2.0 * cross_quartic_integral(u1, u2)?);
    if !(den > 0.0) || !den.is_finite() {
        return Err(ThresholdError::ZeroDenominator);
    }
    let kin = quarter_seminorm_sq(u1) + quarter_seminorm_sq(u2);
    let mass = lp_norm_pow(u1, 2) + lp_norm_pow(u2, 2);
    Ok(kin * mass / den)
}

#[derive(Debug, Clone, Serialize)]
pub struct PBoundReport {
    pub samples: usize,
    /// `a*/(2a)`.
    pub bound: f64,
    /// Smallest `P/bound` seen.
    pub min_ratio: f64,
    /// Every sample satisfied `P ≥ bound·(1 − 1e-3)`.
    pub holds: bool,
}

/// Evaluates `P` on seeded random pairs of two-bump profiles on the soliton grid.
pub fn p_lower_bound_check(gs: &GroundState, a: f64, samples: usize, seed: u64) -> Result<PBoundReport, ThresholdError> {
    use rand::{Rng, SeedableRng};
    if !(a > 0.0 && a.is_finite()) {
        return Err(precondition("a must be positive"));
    }
    let g = gs.grid();
    let bound = gs.a_star / (2.0 * a);
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..samples {
        let mut bump = || {
            let (c, w, s) = (r.gen_range(-3.0..3.0), r.gen_range(0.5..3.0), r.gen_range(-1.0..1.0));
            let (c2, w2) = (r.gen_range(-3.0..3.0), r.gen_range(0.5..3.0));
            Field::from_fn(g, move |x| (-((x - c) / w).powi(2)).exp() + s * (-((x - c2) / w2).powi(2)).exp())
        };
        let (u, v) = (bump(), bump());
        min_ratio = min_ratio.min(p_functional(&u, &v, a)? / bound);
    }
    Ok(PBoundReport {
        samples,
        bound,
        min_ratio,
        holds: min_ratio >= 1.0 - 1e-3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_q;
    use crate::spectral::Multiplier;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn grid() -> Grid1D {
        Grid1D::with_multiplier(512, 32.0, Multiplier::LineCorrected).unwrap()
    }

    fn gs() -> &'static GroundState {
        static GS: OnceLock<GroundState> = OnceLock::new();
        GS.get_or_init(|| solve_q(&grid(), &SolverOptions::default()).unwrap())
    }

    fn flat(a1: f64, a2: f64, beta: f64) -> SystemParams {
        SystemParams::new(a1, a2, beta, PotentialSpec::Flat, PotentialSpec::Flat)
            .unwrap()
            .with_edge_min(0.0)
    }

    fn scan_min(f: impl Fn(f64) -> f64) -> f64 {
        // Dense log scan over (1e-3, 1e3), then a local refinement.
        let n = 20_000;
        let ts = logspace(1e-3, 1e3, n);
        let (k, _) = ts
            .iter()
            .enumerate()
            .map(|(k, &t)| (k, f(t)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let (lo, hi) = (ts[k.saturating_sub(1)], ts[(k + 1).min(n - 1)]);
        (0..=20_000)
            .map(|j| f(lo + (hi - lo) * j as f64 / 20_000.0))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn threshold_examples() {
        let a = 2.5;
        let t = compute_thresholds(1.0, 1.0, a);
        assert_eq!(t.beta_lower, Some(1.5));
        assert_eq!(t.beta_upper, 1.5);
        let t = compute_thresholds(0.0, 0.0, a);
        assert_eq!((t.beta_lower, t.beta_upper), (Some(a), a));
        let t = compute_thresholds(0.2 * a, 0.8 * a, a);
        assert!((t.beta_lower.unwrap() - 0.4 * a).abs() < 1e-15);
        assert!((t.beta_upper - 0.5 * a).abs() < 1e-15);
        let t = compute_thresholds(1.1 * a, 0.5 * a, a);
        assert_eq!((t.beta_lower, t.t0), (None, None));
    }

    #[test]
    fn kappa_is_one_at_t0() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let a = 2.47;
        for _ in 0..100 {
            let (a1, a2) = (r.gen_range(0.01..0.99) * a, r.gen_range(0.01..0.99) * a);
            let th = compute_thresholds(a1, a2, a);
            let k = kappa(th.t0.unwrap(), a1, a2, th.beta_lower.unwrap(), a).unwrap();
            assert!((k - 1.0).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn kappa_limits_and_errors() {
        let a = 2.0;
        assert!((kappa(1e-9, 0.5, 1.5, 0.3, a).unwrap() - a / 0.5).abs() < 1e-6);
        assert!((kappa(1e9, 0.5, 1.5, 0.3, a).unwrap() - a / 1.5).abs() < 1e-6);
        for t in [0.01, 1.0, 70.0] {
            assert_eq!(kappa(t, 0.8, 0.8, 0.0, a).unwrap(), a / 0.8);
        }
        assert!(matches!(kappa(1.0, 0.0, 0.0, 0.0, a), Err(ThresholdError::NonpositiveDenominator)));
        assert!(kappa(0.0, 1.0, 1.0, 0.0, a).is_err());
    }

    #[test]
    fn kappa_infimum_below_beta_lower_exceeds_one() {
        let a = 2.47;
        let (a1, a2) = (0.3 * a, 0.6 * a);
        let b = 0.99 * compute_thresholds(a1, a2, a).beta_lower.unwrap();
        assert!(scan_min(|t| kappa(t, a1, a2, b, a).unwrap()) > 1.0);
    }

    #[test]
    fn kappa_inf_cases() {
        let a = 2.47;
        let (a1, a2) = (0.3 * a, 0.5 * a);
        let th = compute_thresholds(a1, a2, a);
        let k = kappa_inf(a1, a2, th.beta_lower.unwrap(), a).unwrap();
        assert!((k.value - 1.0).abs() < 1e-12);
        assert!((k.t_min - th.t0.unwrap()).abs() < 1e-8);
        let k = kappa_inf(0.7, 0.7, 0.0, a).unwrap();
        assert!(k.flat && k.value == a / 0.7);
        match kappa_inf(0.5, 0.7, 0.0, a) {
            Err(ThresholdError::NoInteriorMinimum {
                limit_at_zero,
                limit_at_infinity,
            }) => assert_eq!((limit_at_zero, limit_at_infinity), (a / 0.5, a / 0.7)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kappa_inf_matches_scan_and_eigenvalue() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let a = 2.47;
        for _ in 0..20 {
            let (a1, a2, b) = (r.gen_range(0.05..1.0) * a, r.gen_range(0.05..1.0) * a, r.gen_range(0.01..1.0) * a);
            let k = kappa_inf(a1, a2, b, a).unwrap();
            let scan = scan_min(|t| kappa(t, a1, a2, b, a).unwrap());
            assert!((k.value - scan).abs() < 1e-8 * scan, "{} vs {scan}", k.value);
            // κ is a Rayleigh quotient of [[a₁, β], [β, a₂]].
            let top = 0.5 * (a1 + a2) + (0.25 * (a1 - a2).powi(2) + b * b).sqrt();
            assert!((k.value - a / top).abs() < 1e-12 * k.value);
        }
    }

    proptest! {
        #[test]
        fn kappa_at_beta_lower_is_at_least_one(f1 in 0.01f64..0.99, f2 in 0.01f64..0.99) {
            let a = 2.47;
            let (a1, a2) = (f1 * a, f2 * a);
            let th = compute_thresholds(a1, a2, a);
            let (b, t0) = (th.beta_lower.unwrap(), th.t0.unwrap());
            for t in logspace(1e-4, 1e4, 400) {
                let k = kappa(t, a1, a2, b, a).unwrap();
                prop_assert!(k >= 1.0 - 1e-14);
                if (k - 1.0).abs() < 1e-14 {
                    prop_assert!((t - t0).abs() < 1e-6 * t0.max(1.0));
                }
            }
        }
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let x = golden_section(|x| (x - 0.3).powi(2), -5.0, 5.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn gamma_on_diagonal_is_pinned() {
        let (g, q) = (grid(), gs());
        let a = q.a_star;
        for b in [0.0, 0.2, 0.4] {
            let e = gamma_estimate(&flat(0.5 * a, 0.5 * a, b * a), &g, q, &SolverOptions::default()).unwrap();
            let exact = 1.0 / (0.5 + b);
            assert_eq!(e.method, GammaMethod::Numeric);
            assert!((e.raw.unwrap() - exact).abs() < 2e-3 * exact, "{:?} vs {exact}", e.raw);
            assert!((e.value - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_ignores_negative_beta() {
        let (g, q) = (grid(), gs());
        let a = q.a_star;
        let o = SolverOptions::default();
        let neg = gamma_estimate(&flat(0.3 * a, 0.6 * a, -0.4 * a), &g, q, &o).unwrap();
        let zero = gamma_estimate(&flat(0.3 * a, 0.6 * a, 0.0), &g, q, &o).unwrap();
        assert_eq!(neg.raw, zero.raw);
        assert_eq!((neg.lower_bound, neg.upper_bound), (zero.lower_bound, zero.upper_bound));
    }

    #[test]
    fn gamma_exceeds_one_at_beta_lower() {
        let (g, q) = (grid(), gs());
        let a = q.a_star;
        let (a1, a2) = (0.3 * a, 0.5 * a);
        let b = compute_thresholds(a1, a2, a).beta_lower.unwrap();
        let e = gamma_estimate(&flat(a1, a2, b), &g, q, &SolverOptions::default()).unwrap();
        assert!(e.raw.unwrap() > 1.0, "{:?}", e.raw);
        assert!(e.lower_bound <= e.value && e.value <= e.upper_bound);
    }

    #[test]
    fn gamma_reports_bounds_when_flow_is_cut_short() {
        let (g, q) = (grid(), gs());
        let a = q.a_star;
        let o = SolverOptions::default().with_max_iter(1).with_tol(1e-300);
        match gamma_estimate(&flat(0.3 * a, 0.6 * a, 0.1 * a), &g, q, &o) {
            Err(ThresholdError::NoConvergence(e)) => {
                assert_eq!(e.method, GammaMethod::BoundsOnly);
                assert!(e.lower_bound <= e.value && e.value <= e.upper_bound);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lipschitz_examples() {
        let a = 2.47;
        let p = [0.5 * a, 0.5 * a, 0.2 * a];
        let r = lipschitz_check(p, p, [1.4, 1.4], a);
        assert!(r.holds && r.difference == 0.0 && r.bound == 0.0);
        let q = [0.5 * a, 0.5 * a, 0.3 * a];
        let r = lipschitz_check(p, q, [1.0 / 0.7, 1.0 / 0.8], a);
        assert!(r.holds && r.difference < r.bound);
        assert!(!lipschitz_check(p, q, [1.0, 10.0], a).holds);
    }

    fn rule(a1: f64, a2: f64, beta: f64, gamma: Option<f64>) -> (Verdict, &'static str) {
        decide(&RuleInputs {
            a1,
            a2,
            beta,
            a_star: 1.0,
            gamma,
            v_floor: None,
            e_hat: None,
            gamma_band: DEFAULT_GAMMA_BAND,
        })
    }

    #[test]
    fn rule_table() {
        assert_eq!(rule(0.5, 0.5, 0.4, None), (Verdict::Exists, "Thm 1.1(i)"));
        assert_eq!(rule(1.1, 0.5, 0.0, None).0, Verdict::NotExists);
        assert_eq!(rule(0.5, 0.5, 0.6, None), (Verdict::NotExists, "Thm 1.1(ii): beta > beta**"));
        assert_eq!(rule(0.3, 0.5, 0.6, Some(1.1)), (Verdict::ExistsNearBetaLower, "Thm 1.2"));
        assert_eq!(rule(0.3, 0.5, 0.6, Some(0.9)), (Verdict::NotExists, "Thm 2.4(ii)"));
        assert_eq!(rule(0.3, 0.5, 0.6, Some(1.01)).0, Verdict::Indeterminate);
        assert_eq!(rule(1.0, 0.5, 0.1, Some(1.5)), (Verdict::Exists, "Thm 2.4(i)"));
        assert_eq!(rule(0.3, 0.5, 0.6, None).0, Verdict::Indeterminate);
        let diag = |floor, e| {
            decide(&RuleInputs {
                a1: 0.6,
                a2: 0.6,
                beta: 0.4,
                a_star: 1.0,
                gamma: None,
                v_floor: Some(floor),
                e_hat: Some(e),
                gamma_band: DEFAULT_GAMMA_BAND,
            })
        };
        assert_eq!(diag(0.0, 0.0), (Verdict::NotExists, "Thm 1.3(i)"));
        assert_eq!(diag(4.0, 0.9), (Verdict::Exists, "Thm 1.3(ii)"));
        assert_eq!(diag(4.0, 4.0).0, Verdict::Indeterminate);
        for v in [Verdict::Exists, Verdict::NotExists, Verdict::ExistsNearBetaLower, Verdict::Indeterminate] {
            assert_eq!(v.to_string().parse::<Verdict>().unwrap(), v);
        }
    }

    #[test]
    fn classify_examples() {
        let (g, q) = (grid(), gs());
        let a = q.a_star;
        let o = SolverOptions::default();
        let fast = ClassifyOptions {
            always_gamma: false,
            ..Default::default()
        };
        let h = |a1: f64, a2: f64, b: f64| SystemParams::harmonic(a1 * a, a2 * a, b * a, 1.0).unwrap().with_edge_min(100.0);
        let c = classify(&h(0.5, 0.5, 0.4), q, &g, &o, &fast).unwrap();
        assert_eq!((c.verdict, c.rule.as_str()), (Verdict::Exists, "Thm 1.1(i)"));
        assert!(c.gamma.is_none());
        let c = classify(&h(1.1, 0.5, 0.0), q, &g, &o, &fast).unwrap();
        assert_eq!(c.verdict, Verdict::NotExists);
        let c = classify(&h(0.5, 0.5, 0.6), q, &g, &o, &fast).unwrap();
        assert_eq!(c.verdict, Verdict::NotExists);
        let c = classify(&h(0.5, 0.5, 0.4), q, &g, &o, &ClassifyOptions::default()).unwrap();
        assert!(c.gamma.unwrap().value > 1.0);
        let c = classify(&h(0.6, 0.6, 0.4), q, &g, &o, &fast).unwrap();
        assert_eq!((c.verdict, c.rule.as_str()), (Verdict::NotExists, "Thm 1.3(i)"));
        assert!(c.critical.unwrap().estimate.abs() < 1e-3);
    }

    #[test]
    fn critical_energy_with_separated_wells_is_below_floor() {
        let (g, q) = (grid(), gs());
        let a = q.a_star;
        let p = SystemParams::new(
            0.6 * a,
            0.6 * a,
            0.4 * a,
            PotentialSpec::shifted_well(2.0, 1.0),
            PotentialSpec::shifted_well(-2.0, 1.0),
        )
        .unwrap()
        .with_edge_min(100.0);
        let c = critical_energy(&p, &g, q, &SolverOptions::default()).unwrap();
        assert!((c.floor - 4.0).abs() < 1e-9);
        assert!((c.trial - 4.0).abs() < 1e-3, "{}", c.trial);
        assert!(c.flow.unwrap() < c.floor);
        let v = classify(&p, q, &g, &SolverOptions::default(), &ClassifyOptions::default()).unwrap();
        assert_eq!((v.verdict, v.rule.as_str()), (Verdict::Exists, "Thm 1.3(ii)"));
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(-0.5), 1.0);
        assert_eq!(cutoff(1.0), 0.0);
        assert_eq!(cutoff(3.0), 0.0);
        let mut prev = 1.0;
        for k in 0..=100 {
            let c = cutoff(0.5 + 0.005 * k as f64);
            assert!((0.0..=1.0).contains(&c) && c <= prev);
            prev = c;
        }
    }

    #[test]
    fn trial_function_normalization() {
        let small = Grid1D::with_multiplier(1024, 2.0, Multiplier::LineCorrected).unwrap();
        for r in [4.0, 16.0] {
            let t = trial_psi_r(&small, gs(), 0.0, r).unwrap();
            assert!((lp_norm_pow(&t.field, 2) - 1.0).abs() < 1e-10);
            assert!(t.a_r_sq >= 1.0 && t.a_r_sq <= 1.0 + 5.0 / r.powi(3), "{}", t.a_r_sq);
        }
        assert!(matches!(
            trial_psi_r(&small, gs(), 0.0, 300.0),
            Err(ThresholdError::Precondition(_))
        ));
        let coarse = Grid1D::with_multiplier(64, 2.0, Multiplier::LineCorrected).unwrap();
        assert!(matches!(trial_psi_r(&coarse, gs(), 0.0, 16.0), Err(ThresholdError::ResolutionTooCoarse(_))));
        assert!(matches!(trial_psi_r(&small, gs(), 0.0, 32.0), Err(ThresholdError::ResolutionTooCoarse(_))));
        assert!(trial_psi_r(&small, gs(), 1.5, 4.0).is_err());
        assert!(trial_psi_r(&small, gs(), 0.0, 1.0).is_err());
    }

    #[test]
    fn scaling_probe_identities() {
        let q = gs();
        let u = truncated_soliton(q);
        let free = flat(1e-300, 1e-300, 0.0);
        let tr = scaling_probe(&u, &u, &free, &[1.0, 1.5, 7.0, 100.0]).unwrap();
        let e1 = tr.points[0].energy;
        let direct = energy_terms(&u, &u, &free).unwrap().total(1e-300, 1e-300, 0.0);
        assert!((e1 - direct).abs() < 1e-14 * direct.abs());
        for p in &tr.points {
            assert!((p.energy - p.param * e1).abs() < 1e-12 * p.energy.abs());
        }
        assert!(tr.points[1].resampled.is_none(), "the soliton spectrum is too wide to compress");
        // Resampled smooth fields agree with the scaling law up to the
        // finite-box error of the kinetic term.
        let h = SystemParams::harmonic(0.7, 0.4, 0.2, 0.3).unwrap().with_edge_min(0.0);
        let g1 = Field::from_fn(q.grid(), |x| (-x * x).exp()).normalized().unwrap();
        let g2 = Field::from_fn(q.grid(), |x| (-(x - 0.5).powi(2) / 2.0).exp()).normalized().unwrap();
        let tr = scaling_probe(&g1, &g2, &h, &[1.0, 1.5, 2.0]).unwrap();
        for p in &tr.points {
            let r = p.resampled.expect("resolvable");
            assert!((r - p.energy).abs() < 1e-5 * r.abs(), "{r} vs {}", p.energy);
        }
        let wide = Field::from_fn(q.grid(), |x| (-x * x / 800.0).exp());
        assert!(matches!(scaling_probe(&wide, &wide, &free, &[1.0]), Err(ThresholdError::SupportTooWide(_))));
        assert!(scaling_probe(&u, &u, &free, &[0.5]).is_err());
    }

    #[test]
    fn scaling_probe_diverges_above_beta_upper() {
        let q = gs();
        let a = q.a_star;
        let u = truncated_soliton(q);
        let p = SystemParams::harmonic(0.5 * a, 0.5 * a, 0.7 * a, 0.05).unwrap().with_edge_min(0.0);
        let tr = scaling_probe(&u, &u, &p, &logspace(1.0, 1e3, 25)).unwrap();
        assert!(tr.diverges());
        let rho0 = scaling_quotient(&u, &u, &p).unwrap();
        assert!(rho0 < 1.0);
        let analytic = tr.analytic_slope.unwrap();
        assert!(analytic < 0.0 && (tr.slope - analytic).abs() < 0.1 * analytic.abs());
    }

    #[test]
    fn psi_r_trace_signals_supercritical_mass() {
        let (g, q) = (grid(), gs());
        let a = q.a_star;
        let sup = SystemParams::harmonic(1.0625 * a, 0.1 * a, 0.25 * a, 1.0).unwrap().with_edge_min(100.0);
        assert!(divergence_probe(&sup, &g, q).unwrap().unwrap().diverges());
        let sub = SystemParams::harmonic(0.5 * a, 0.1 * a, 0.25 * a, 1.0).unwrap().with_edge_min(100.0);
        assert!(divergence_probe(&sub, &g, q).unwrap().is_none());
        let tr = psi_r_trace(&sub, &g, q, &logspace(2.0, 1e3, 10), PsiRMode::Single(0)).unwrap();
        assert!(!tr.diverges());
        let pair = SystemParams::harmonic(0.5 * a, 0.5 * a, 0.6 * a, 1.0).unwrap().with_edge_min(100.0);
        assert!(divergence_probe(&pair, &g, q).unwrap().unwrap().diverges());
        let csv = tr.to_csv();
        assert!(csv.starts_with("lambda_or_R,energy_or_term\n"));
        assert_eq!(csv.lines().count(), 11);
    }

    #[test]
    fn coupled_soliton_identities() {
        let q = gs();
        let a = q.a_star;
        for (x, b) in [(0.3, 0.5), (0.7, 0.1), (0.4, 0.45)] {
            let c = coupled_soliton(x * a, b * a, q, None).unwrap();
            let exact = 1.0 / ((x + b) * a);
            assert!((c.k - exact).abs() < 1e-12 && (c.s - exact).abs() < 1e-12);
            assert!((c.rho1 - 1.0 / (x + b)).abs() < 1e-10);
            assert!(c.linear_residual < 1e-12);
            assert!(c.system_residual < 10.0 * SolverOptions::default().tol, "{}", c.system_residual);
            assert!(c.pohozaev_residual < 1e-4, "{}", c.pohozaev_residual);
        }
        assert!(matches!(coupled_soliton(0.5, 0.5, q, None), Err(ThresholdError::SingularCouplings)));
        assert!(coupled_soliton(0.5, 0.5, q, Some(0.0)).is_err());
        let c = coupled_soliton(0.5 * a, 0.5 * a, q, Some(PI / 4.0)).unwrap();
        assert!((c.p_value - 1.0).abs() < 1e-4, "{}", c.p_value);
        for th in [0.3, 2.0, 4.0] {
            let c = coupled_soliton(0.5 * a, 0.5 * a, q, Some(th)).unwrap();
            assert!((c.p_value - 1.0).abs() < 1e-4);
            assert!(c.linear_residual < 1e-12);
        }
    }

    #[test]
    fn p_functional_bounds_and_scaling() {
        let q = gs();
        let a_star = q.a_star;
        let a: f64 = 0.8;
        let half = q.q.scaled(1.0 / (2.0_f64 * a).sqrt());
        let p = p_functional(&half, &half, a).unwrap();
        assert!((p - a_star / (2.0 * a)).abs() < 1e-4 * p);
        let report = p_lower_bound_check(q, a, 50, 21).unwrap();
        assert!(report.holds && report.min_ratio.is_finite());
        let g = q.grid();
        let mut r = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let mut bump = || {
                let (c, w, s) = (r.gen_range(-3.0..3.0), r.gen_range(0.5..3.0), r.gen_range(-1.0..1.0));
                let (c2, w2) = (r.gen_range(-3.0..3.0), r.gen_range(0.5..3.0));
                Field::from_fn(g, move |x| (-((x - c) / w).powi(2)).exp() + s * (-((x - c2) / w2).powi(2)).exp())
            };
            let (u, v) = (bump(), bump());
            let p = p_functional(&u, &v, a).unwrap();
            assert!(p >= a_star / (2.0 * a) * (1.0 - 1e-3));
            let scaled = p_functional(&u.scaled(3.7), &v.scaled(3.7), a).unwrap();
            assert!((scaled - p).abs() < 1e-12 * p);
        }
        let z = Field::zeros(g);
        assert!(matches!(p_functional(&z, &z, a), Err(ThresholdError::ZeroDenominator)));
    }
}
