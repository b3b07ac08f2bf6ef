//! Periodic pseudospectral discretization of the half-Laplacian.
//!
//! A [`Grid1D`] samples the box `[-L, L)` at `n` equispaced points and carries
//! the frequency ladder `ξ_k = πk/L`, `k = -n/2 .. n/2-1`. Fourier
//! coefficients are normalized as Fourier-series coefficients of the box,
//!
//! ```text
//! f(x_j) = Σ_k c_k exp(i ξ_k (x_j + L)),    c_k = (1/n) Σ_j f_j exp(-i ξ_k (x_j + L)),
//! ```
//!
//! so that Plancherel reads `∫ f² dx = 2L Σ_k |c_k|²` and the quarter seminorm
//! is `‖(-Δ)^{1/4} f‖² = 2L Σ_k m(ξ_k) |c_k|²`, where `m` is the multiplier
//! symbol of the grid (see [`Multiplier`]). Integrals are trapezoidal sums
//! `dx Σ_j`, which are spectrally accurate for smooth periodic integrands.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible sample count.
pub const MIN_SAMPLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("sample count {0} must be a power of two and at least {MIN_SAMPLES}")]
    BadSampleCount(usize),
    #[error("half length {0} must be finite and positive")]
    BadHalfLength(f64),
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("imaginary residue {residue:e} exceeds tolerance {limit:e}")]
    ImaginaryResidueTooLarge { residue: f64, limit: f64 },
}

/// Symbol used when a Fourier multiplier of the half-Laplacian is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplier {
    /// `|ξ_k|` sampled exactly on the frequency ladder. Constants are in the kernel.
    #[default]
    Periodic,
    /// `|ξ_k|` with the zero mode weighted by `Δξ/6`.
    ///
    /// The frequency sum `Σ_k |ξ_k| |c_k|²` is a trapezoidal rule for an
    /// integrand with a kink at `ξ = 0`; its leading error is
    /// `-(Δξ)²/6 · |ĉ(0)|²`. Giving the zero mode the weight `Δξ/6` cancels it,
    /// so quadratic forms approximate their whole-line values up to the
    /// truncated tail mass instead of `O(L⁻²)`.
    LineCorrected,
    /// `|ξ|²` (the full Laplacian). Only used for fault injection.
    Squared,
}

impl Multiplier {
    fn symbol(self, k: i64, dxi: f64) -> f64 {
        let xi = (k as f64 * dxi).abs();
        match self {
            Multiplier::Periodic => xi,
            Multiplier::LineCorrected if k == 0 => dxi / 6.0,
            Multiplier::LineCorrected => xi,
            Multiplier::Squared => xi * xi,
        }
    }
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Multiplier::Periodic => "periodic",
            Multiplier::LineCorrected => "line-corrected",
            Multiplier::Squared => "squared",
        };
        f.write_str(s)
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    fine_forward: Arc<dyn Fft<f64>>,
    fine_inverse: Arc<dyn Fft<f64>>,
    /// Frequencies in FFT storage order (0, 1, ..., n/2-1, -n/2, ..., -1).
    freqs: Vec<f64>,
    /// Multiplier symbol in FFT storage order.
    symbol: Vec<f64>,
}

/// Periodic truncated grid on `[-L, L)`.
#[derive(Clone)]
pub struct Grid1D {
    n: usize,
    half_length: f64,
    multiplier: Multiplier,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("n", &self.n)
            .field("half_length", &self.half_length)
            .field("multiplier", &self.multiplier)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.half_length == other.half_length
            && self.multiplier == other.multiplier
    }
}

impl Grid1D {
    pub fn new(n: usize, half_length: f64) -> Result<Self, SpectralError> {
        Self::with_multiplier(n, half_length, Multiplier::Periodic)
    }

    pub fn with_multiplier(
        n: usize,
        half_length: f64,
        multiplier: Multiplier,
    ) -> Result<Self, SpectralError> {
        if n < MIN_SAMPLES || !n.is_power_of_two() {
            return Err(SpectralError::BadSampleCount(n));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(SpectralError::BadHalfLength(half_length));
        }
        let mut planner = FftPlanner::new();
        let dxi = PI / half_length;
        let ks: Vec<i64> = (0..n).map(|j| signed_index(j, n)).collect();
        let plans = Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            fine_forward: planner.plan_fft_forward(2 * n),
            fine_inverse: planner.plan_fft_inverse(2 * n),
            freqs: ks.iter().map(|&k| k as f64 * dxi).collect(),
            symbol: ks.iter().map(|&k| multiplier.symbol(k, dxi)).collect(),
        };
        Ok(Self {
            n,
            half_length,
            multiplier,
            plans: Arc::new(plans),
        })
    }

    /// Same samples and box, different multiplier symbol.
    pub fn remultiplied(&self, multiplier: Multiplier) -> Self {
        Self::with_multiplier(self.n, self.half_length, multiplier)
            .expect("grid parameters were already validated")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn multiplier(&self) -> Multiplier {
        self.multiplier
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Frequency spacing `π/L`.
    pub fn dxi(&self) -> f64 {
        PI / self.half_length
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Index of the sample at `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// Frequencies `ξ_k` in FFT storage order, matching [`SpectralCoeffs::coeffs`].
    pub fn freqs(&self) -> &[f64] {
        &self.plans.freqs
    }

    /// Multiplier symbol in FFT storage order.
    pub fn symbol(&self) -> &[f64] {
        &self.plans.symbol
    }

    /// Index `j ↦ (n - j) mod n`, the reflection `x ↦ -x`.
    pub fn mirror(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plans.forward.process(&mut buf);
        let inv_n = 1.0 / self.n as f64;
        for c in &mut buf {
            *c *= inv_n;
        }
        buf
    }

    /// Inverse transform; returns the real part and the largest imaginary magnitude.
    pub(crate) fn inverse(&self, mut coeffs: Vec<Complex64>) -> (Vec<f64>, f64) {
        self.plans.inverse.process(&mut coeffs);
        let mut max_imag = 0.0_f64;
        let re = coeffs
            .iter()
            .map(|c| {
                max_imag = max_imag.max(c.im.abs());
                c.re
            })
            .collect();
        (re, max_imag)
    }

    /// Multiplies the spectrum of `values` by `weight(k, symbol_k)` (storage index, symbol).
    pub(crate) fn filter(&self, values: &[f64], weight: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let mut c = self.forward(values);
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= weight(k, self.plans.symbol[k]);
        }
        self.inverse(c).0
    }

    /// `√(-Δ)` on raw samples without validation.
    pub(crate) fn sqrt_laplacian(&self, values: &[f64]) -> Vec<f64> {
        self.filter(values, |_, m| m)
    }

    /// `2L Σ m_k |c_k|²` on raw samples.
    pub(crate) fn seminorm_sq(&self, values: &[f64]) -> f64 {
        let c = self.forward(values);
        2.0 * self.half_length
            * c.iter()
                .zip(&self.plans.symbol)
                .map(|(ck, m)| m * ck.norm_sqr())
                .sum::<f64>()
    }

    pub(crate) fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        self.dx() * values.into_iter().sum::<f64>()
    }

    /// Samples of the trigonometric interpolant on the twice finer grid `x_0, x_0 + dx/2, ...`.
    pub(crate) fn refine(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n;
        let c = self.forward(values);
        let mut b = vec![Complex64::new(0.0, 0.0); 2 * n];
        b[..n / 2].copy_from_slice(&c[..n / 2]);
        b[n + n / 2 + 1..].copy_from_slice(&c[n / 2 + 1..]);
        b[n / 2] = 0.5 * c[n / 2];
        b[n + n / 2] = 0.5 * c[n / 2];
        self.plans.fine_inverse.process(&mut b);
        b.into_iter().map(|z| z.re).collect()
    }

    /// Adjoint of [`Grid1D::refine`] with respect to the two trapezoidal inner
    /// products: the Fourier truncation of fine samples back onto the grid.
    pub(crate) fn project(&self, fine: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut b: Vec<Complex64> = fine.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plans.fine_forward.process(&mut b);
        let scale = 1.0 / (2 * n) as f64;
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        c[..n / 2].copy_from_slice(&b[..n / 2]);
        c[n / 2 + 1..].copy_from_slice(&b[n + n / 2 + 1..]);
        c[n / 2] = 0.5 * (b[n / 2] + b[n + n / 2]);
        for z in &mut c {
            *z *= scale;
        }
        self.inverse(c).0
    }

    /// Projected cube `P_N[(I u)³]`, the `L²` gradient of `¼ ∫ (I u)⁴`.
    pub(crate) fn cube(&self, values: &[f64]) -> Vec<f64> {
        let fine: Vec<f64> = self.refine(values).into_iter().map(|v| v * v * v).collect();
        self.project(&fine)
    }

    /// `∫ (I u)⁴` on raw samples.
    pub(crate) fn quartic(&self, values: &[f64]) -> f64 {
        self.integrate_fine(self.refine(values).into_iter().map(|v| v.powi(4)))
    }

    /// `∫ f dx` for samples on the refined grid.
    pub(crate) fn integrate_fine(&self, fine: impl IntoIterator<Item = f64>) -> f64 {
        0.5 * self.dx() * fine.into_iter().sum::<f64>()
    }
}

fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Real samples of one component on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid1D, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.n() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(j));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.n()],
        }
    }

    /// Samples `f` at the grid points. Panics if `f` returns a non-finite value.
    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.xs().into_iter().map(f).collect();
        Self::new(grid, values).expect("sampled function must be finite on the grid")
    }

    pub(crate) fn from_raw(grid: &Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The same samples attached to a grid with identical `n` and `L`.
    pub fn on_grid(&self, grid: &Grid1D) -> Result<Self, SpectralError> {
        if grid.n() != self.grid.n() || grid.half_length() != self.grid.half_length() {
            return Err(SpectralError::GridMismatch);
        }
        Ok(Self::from_raw(grid, self.values.clone()))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|v| alpha * v).collect())
    }

    /// `alpha·self + beta·other`.
    pub fn combine(&self, alpha: f64, other: &Field, beta: f64) -> Result<Self, SpectralError> {
        same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    /// Rescaled copy with unit `L²` mass. Returns `None` for the zero field.
    pub fn normalized(&self) -> Option<Self> {
        let m = lp_norm_pow(self, 2);
        (m > 0.0).then(|| self.scaled(1.0 / m.sqrt()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|f(x) - f(-x)|` over the grid.
    pub fn evenness_defect(&self) -> f64 {
        (0..self.grid.n())
            .map(|j| (self.values[j] - self.values[self.grid.mirror(j)]).abs())
            .fold(0.0, f64::max)
    }

    /// `(f(x) + f(-x))/2`.
    pub fn symmetrized(&self) -> Self {
        let g = &self.grid;
        let values = (0..g.n())
            .map(|j| 0.5 * (self.values[j] + self.values[g.mirror(j)]))
            .collect();
        Self::from_raw(g, values)
    }

    /// Value of the trigonometric interpolant at an arbitrary point (periodic in `2L`).
    pub fn interpolate(&self, x: f64) -> f64 {
        Interpolant::new(self).eval(x)
    }
}

/// Trigonometric interpolant of a [`Field`] for repeated off-grid evaluation.
#[derive(Debug, Clone)]
pub struct Interpolant {
    grid: Grid1D,
    coeffs: Vec<Complex64>,
}

impl Interpolant {
    pub fn new(f: &Field) -> Self {
        Self {
            grid: f.grid.clone(),
            coeffs: f.grid.forward(&f.values),
        }
    }

    /// Interpolant value at `x`, periodic in `2L`.
    pub fn eval(&self, x: f64) -> f64 {
        eval_trig(&self.grid, &self.coeffs, x)
    }

    /// Like [`Interpolant::eval`] but zero outside `[-L, L)`.
    pub fn eval_in_box(&self, x: f64) -> f64 {
        let l = self.grid.half_length();
        if x < -l || x >= l {
            0.0
        } else {
            self.eval(x)
        }
    }
}

fn eval_trig(grid: &Grid1D, c: &[Complex64], x: f64) -> f64 {
    let n = grid.n();
    let phase = grid.dxi() * (x + grid.half_length());
    let step = Complex64::from_polar(1.0, phase);
    let mut w = step;
    let mut acc = c[0].re;
    for ck in &c[1..n / 2] {
        acc += 2.0 * (ck * w).re;
        w *= step;
    }
    // Nyquist mode: real part of the symmetric split ±n/2.
    acc + c[n / 2].re * (phase * (n / 2) as f64).cos()
}

/// `λ^{1/2} f(λx)` evaluated spectrally. Points with `|λx| ≥ L` are set to zero,
/// so for `λ > 1` the input must be supported inside `[-L/λ, L/λ]` up to
/// negligible tails.
pub fn dilate(f: &Field, lambda: f64) -> Field {
    let grid = f.grid();
    let interp = Interpolant::new(f);
    let amp = lambda.sqrt();
    let l = grid.half_length();
    let values = grid
        .xs()
        .into_iter()
        .map(|x| {
            let y = lambda * x;
            if y.abs() >= l {
                0.0
            } else {
                amp * interp.eval(y)
            }
        })
        .collect();
    Field::from_raw(grid, values)
}

pub(crate) fn same_grid(f: &Field, g: &Field) -> Result<(), SpectralError> {
    if f.grid == g.grid {
        Ok(())
    } else {
        Err(SpectralError::GridMismatch)
    }
}

/// Fourier coefficients of a [`Field`], stored in FFT order matching [`Grid1D::freqs`].
#[derive(Debug, Clone)]
pub struct SpectralCoeffs {
    grid: Grid1D,
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Largest `|c(-ξ) - conj c(ξ)|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.grid.n();
        (0..n)
            .map(|k| (self.coeffs[(n - k) % n] - self.coeffs[k].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Spectral side of Plancherel, `2L Σ |c_k|²`.
    pub fn plancherel_mass(&self) -> f64 {
        2.0 * self.grid.half_length() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

pub fn forward_transform(f: &Field) -> SpectralCoeffs {
    SpectralCoeffs {
        grid: f.grid.clone(),
        coeffs: f.grid.forward(&f.values),
    }
}

/// Inverse of [`forward_transform`]. Fails when the coefficients do not describe a real field.
pub fn inverse_transform(c: &SpectralCoeffs) -> Result<Field, SpectralError> {
    let (values, max_imag) = c.grid.inverse(c.coeffs.clone());
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let limit = 1e-8 * scale;
    if max_imag > limit {
        return Err(SpectralError::ImaginaryResidueTooLarge {
            residue: max_imag,
            limit,
        });
    }
    Field::new(&c.grid, values)
}

/// `√(-Δ) f`, i.e. the spectrum multiplied by the grid symbol.
pub fn apply_sqrt_laplacian(f: &Field) -> Result<Field, SpectralError> {
    let grid = &f.grid;
    let mut c = grid.forward(&f.values);
    for (ck, m) in c.iter_mut().zip(grid.symbol()) {
        *ck *= *m;
    }
    let (values, max_imag) = grid.inverse(c);
    let limit = 1e-8 * lp_norm_pow(f, 2).sqrt();
    if max_imag > limit.max(f64::MIN_POSITIVE) {
        return Err(SpectralError::ImaginaryResidueTooLarge {
            residue: max_imag,
            limit,
        });
    }
    Field::new(grid, values)
}

/// `‖(-Δ)^{1/4} f‖₂²`.
pub fn quarter_seminorm_sq(f: &Field) -> f64 {
    f.grid.seminorm_sq(&f.values)
}

/// `∫ |f|^p dx` by the trapezoidal rule.
pub fn lp_norm_pow(f: &Field, p: u32) -> f64 {
    let p = p as i32;
    f.grid.integrate(f.values.iter().map(|v| v.abs().powi(p)))
}

/// `∫ f⁴ dx` of the band-limited interpolant, exact up to round-off.
///
/// This is the quadrature used by every variational quantity in the crate;
/// its gradient is the projected cube, so discrete energies and their
/// Euler–Lagrange equations stay consistent.
pub fn quartic_integral(f: &Field) -> f64 {
    let g = &f.grid;
    g.integrate_fine(g.refine(&f.values).into_iter().map(|v| v.powi(4)))
}

/// `∫ f² g² dx` of the band-limited interpolants.
pub fn cross_quartic_integral(f: &Field, g: &Field) -> Result<f64, SpectralError> {
    same_grid(f, g)?;
    let grid = &f.grid;
    let a = grid.refine(&f.values);
    let b = grid.refine(&g.values);
    Ok(grid.integrate_fine(a.iter().zip(&b).map(|(x, y)| x * x * y * y)))
}

/// `∫ f g dx`.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64, SpectralError> {
    same_grid(f, g)?;
    Ok(f.grid
        .integrate(f.values.iter().zip(&g.values).map(|(a, b)| a * b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::new(64, 8.0).unwrap()
    }

    #[test]
    fn grid_invariants() {
        let g = grid();
        assert_eq!(g.dx() * g.n() as f64, 2.0 * g.half_length());
        assert_eq!(g.freqs().iter().filter(|&&f| f == 0.0).count(), 1);
        assert_eq!(g.x(g.origin_index()), 0.0);
        assert!(matches!(Grid1D::new(8, 1.0), Err(SpectralError::BadSampleCount(8))));
        assert!(matches!(Grid1D::new(48, 1.0), Err(SpectralError::BadSampleCount(48))));
        assert!(Grid1D::new(64, 0.0).is_err());
        assert!(Grid1D::new(64, f64::NAN).is_err());
    }

    #[test]
    fn field_rejects_bad_samples() {
        let g = grid();
        assert!(matches!(
            Field::new(&g, vec![0.0; 10]),
            Err(SpectralError::LengthMismatch { .. })
        ));
        let mut v = vec![0.0; 64];
        v[3] = f64::INFINITY;
        assert_eq!(Field::new(&g, v), Err(SpectralError::NonFinite(3)));
    }

    #[test]
    fn constant_has_only_dc() {
        let g = grid();
        let c = forward_transform(&Field::from_fn(&g, |_| 2.5));
        assert!((c.coeffs()[0].re - 2.5).abs() < 1e-14);
        assert!(c.coeffs()[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn single_mode_has_two_coefficients() {
        let g = grid();
        let l = g.half_length();
        let c = forward_transform(&Field::from_fn(&g, |x| (PI * x / l).cos()));
        let big: Vec<f64> = (0..g.n())
            .filter(|&k| c.coeffs()[k].norm() > 1e-12)
            .map(|k| g.freqs()[k])
            .collect();
        assert_eq!(big.len(), 2);
        assert!(big.iter().all(|xi| (xi.abs() - PI / l).abs() < 1e-14));
    }

    #[test]
    fn sqrt_laplacian_on_modes() {
        let g = grid();
        let l = g.half_length();
        let zero = apply_sqrt_laplacian(&Field::from_fn(&g, |_| 1.3)).unwrap();
        assert!(zero.max_abs() < 1e-14);
        for k in [1.0, 3.0, 7.0] {
            let f = Field::from_fn(&g, |x| (k * PI * x / l).cos());
            let lf = apply_sqrt_laplacian(&f).unwrap();
            let expect = f.scaled(k * PI / l);
            let err = lf.combine(1.0, &expect, -1.0).unwrap().max_abs();
            assert!(err < 1e-12, "k={k} err={err}");
            let q = quarter_seminorm_sq(&f);
            assert!((q - k * PI / l * lp_norm_pow(&f, 2)).abs() < 1e-12);
        }
        assert_eq!(quarter_seminorm_sq(&Field::from_fn(&g, |_| 4.0)), 0.0);
    }

    #[test]
    fn line_correction_only_touches_dc() {
        let g = Grid1D::with_multiplier(64, 8.0, Multiplier::LineCorrected).unwrap();
        assert!((g.symbol()[0] - g.dxi() / 6.0).abs() < 1e-15);
        assert_eq!(&g.symbol()[1..], &grid().symbol()[1..]);
    }

    #[test]
    fn lp_norms() {
        let g = grid();
        assert_eq!(lp_norm_pow(&Field::zeros(&g), 4), 0.0);
        let c: f64 = 1.7;
        let f = Field::from_fn(&g, |_| c);
        assert!((lp_norm_pow(&f, 2) - 16.0 * c.powi(2)).abs() < 1e-12);
        assert!((lp_norm_pow(&f, 4) - 16.0 * c.powi(4)).abs() < 1e-11);
    }

    #[test]
    fn inner_products() {
        let g = grid();
        let l = g.half_length();
        let f = Field::from_fn(&g, |x| (PI * x / l).cos());
        let s = Field::from_fn(&g, |x| (PI * x / l).sin());
        assert!(inner_product(&f, &s).unwrap().abs() < 1e-12);
        assert_eq!(inner_product(&f, &Field::zeros(&g)).unwrap(), 0.0);
        let h = Field::zeros(&Grid1D::new(32, 8.0).unwrap());
        assert_eq!(inner_product(&f, &h), Err(SpectralError::GridMismatch));
    }

    #[test]
    fn corrupted_spectrum_is_rejected() {
        let g = grid();
        let f = Field::from_fn(&g, |x| (-x * x).exp());
        let mut c = forward_transform(&f);
        c.coeffs[3] += Complex64::new(0.0, 0.1);
        assert!(matches!(
            inverse_transform(&c),
            Err(SpectralError::ImaginaryResidueTooLarge { .. })
        ));
    }

    #[test]
    fn interpolation_and_dilation() {
        let g = Grid1D::new(256, 16.0).unwrap();
        let f = Field::from_fn(&g, |x| (-x * x).exp());
        for x in [0.0, 0.3, -1.17, 2.5] {
            assert!((f.interpolate(x) - (-x * x).exp()).abs() < 1e-12);
        }
        let d = dilate(&f, 2.0);
        let expect = Field::from_fn(&g, |x| 2f64.sqrt() * (-4.0 * x * x).exp());
        assert!(d.combine(1.0, &expect, -1.0).unwrap().max_abs() < 1e-12);
        assert!((lp_norm_pow(&d, 2) - lp_norm_pow(&f, 2)).abs() < 1e-12);
    }

    #[test]
    fn refine_project_are_adjoint() {
        let g = Grid1D::new(32, 3.0).unwrap();
        let u: Vec<f64> = (0..32).map(|j| ((j * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let w: Vec<f64> = (0..64).map(|j| ((j * 5 % 13) as f64 - 6.0) / 4.0).collect();
        let lhs = g.integrate_fine(g.refine(&u).iter().zip(&w).map(|(a, b)| a * b));
        let rhs = g.integrate(u.iter().zip(g.project(&w)).map(|(a, b)| a * b));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} {rhs}");
        // Identity on fields without a Nyquist component.
        let u = g.filter(&u, |k, _| if k == 16 { 0.0 } else { 1.0 });
        let back = g.project(&g.refine(&u));
        let err = back.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn quartic_of_band_limited_field_is_exact() {
        // cos⁴ has ∫ = 3/8 · 2L over a full period.
        let g = Grid1D::new(16, PI).unwrap();
        let f = Field::from_fn(&g, |x| (4.0 * x).cos());
        assert!((quartic_integral(&f) - 0.75 * PI).abs() < 1e-12);
        // The plain trapezoid aliases the 16-th harmonic onto the mean.
        assert!((lp_norm_pow(&f, 4) - 0.75 * PI).abs() > 1e-3);
        let h = Field::from_fn(&g, |x| (3.0 * x).sin());
        let expect = 2.0 * PI * 0.25;
        assert!((cross_quartic_integral(&f, &h).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn symmetrize_and_mirror() {
        let g = grid();
        let f = Field::from_fn(&g, |x| x + x * x);
        let s = f.symmetrized();
        assert!(s.evenness_defect() < 1e-15);
        assert!(f.evenness_defect() > 1.0);
    }
}
