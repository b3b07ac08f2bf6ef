//! Constrained minimizers, critical constants and existence thresholds for the
//! two-component half-Laplacian Schrödinger system
//!
//! ```text
//! √(-Δ)u₁ + V₁u₁ = μ₁u₁ + a₁u₁³ + βu₂²u₁
//! √(-Δ)u₂ + V₂u₂ = μ₂u₂ + a₂u₂³ + βu₁²u₂
//! ```
//!
//! on the line, discretized on a periodic box.
//!
//! * [`spectral`]: grids, fields, the half-Laplacian multiplier and quadrature.
//! * [`ground_state`]: the soliton `Q`, the critical mass `a*` and its identities.
//! * [`constrained`]: the energy, its gradient and the mass-constrained flow.
//! * [`thresholds`]: closed-form thresholds, the quotient `Γ`, the classifier and probes.
//! * [`experiments`]: sweeps, persistence, the verification suite and plot output.

pub mod constrained;
pub mod experiments;
pub mod ground_state;
pub mod io;
pub mod potential;
pub mod spectral;
pub mod thresholds;

use serde::{Deserialize, Serialize};

pub use ground_state::{GroundState, GroundStateMethod};
pub use spectral::{Field, Grid1D, Multiplier};

/// Iteration controls shared by the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative residual at which a solve counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial pseudo-time step of gradient flows.
    pub dt0: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            dt0: 0.1,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}
