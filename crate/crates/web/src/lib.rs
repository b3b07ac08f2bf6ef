//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Results cross the boundary as JSON strings. Couplings are given in units
//! of `a*`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fracbec::constrained::SystemParams;
use fracbec::ground_state::{solve_q, GroundState, PohozaevReport};
use fracbec::potential::PotentialSpec;
use fracbec::spectral::{Grid1D, Multiplier};
use fracbec::thresholds::{classify, compute_thresholds, kappa, kappa_inf, ClassifyOptions, Thresholds};
use fracbec::SolverOptions;

#[derive(Serialize)]
pub struct Profile {
    pub a_star: f64,
    pub pohozaev: f64,
    pub iterations: usize,
    pub xs: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Serialize)]
pub struct KappaCurve {
    pub thresholds: Thresholds,
    pub ts: Vec<f64>,
    pub kappa: Vec<f64>,
    pub inf: f64,
    pub t_min: f64,
}

#[derive(Serialize)]
pub struct Verdict {
    pub verdict: String,
    pub rule: String,
    pub gamma: Option<f64>,
    pub beta_lower: Option<f64>,
    pub beta_upper: f64,
}

/// A solved ground state plus the grid it lives on.
#[wasm_bindgen]
pub struct Demo {
    grid: Grid1D,
    gs: GroundState,
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

impl Demo {
    pub fn solve(n: usize, half_length: f64) -> Result<Self, String> {
        let grid = Grid1D::with_multiplier(n, half_length, Multiplier::LineCorrected).map_err(|e| e.to_string())?;
        let gs = solve_q(&grid, &SolverOptions::default()).map_err(|e| e.to_string())?;
        Ok(Self { grid, gs })
    }

    pub fn a_star(&self) -> f64 {
        self.gs.a_star
    }

    pub fn profile_data(&self) -> Profile {
        Profile {
            a_star: self.gs.a_star,
            pohozaev: PohozaevReport::of(&self.gs.q).max_rel_residual,
            iterations: self.gs.iterations,
            xs: self.grid.xs(),
            q: self.gs.q.values().to_vec(),
        }
    }

    /// `κ(t)` on `points` log-spaced values in `[1e-2, 1e2]`.
    pub fn kappa_data(&self, a1: f64, a2: f64, beta: f64, points: usize) -> Result<KappaCurve, String> {
        let a = self.gs.a_star;
        let (a1, a2, bp) = (a1 * a, a2 * a, beta.max(0.0) * a);
        let points = points.max(2);
        let ts: Vec<f64> = (0..points)
            .map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / (points - 1) as f64))
            .collect();
        let values = ts
            .iter()
            .map(|&t| kappa(t, a1, a2, bp, a))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let inf = kappa_inf(a1, a2, bp, a).map_err(|e| e.to_string())?;
        Ok(KappaCurve {
            thresholds: compute_thresholds(a1, a2, a),
            ts,
            kappa: values,
            inf: inf.value,
            t_min: inf.t_min,
        })
    }

    /// Verdict for harmonic traps (`omega = 1`, or shifted to `±offset`).
    pub fn classify_data(&self, a1: f64, a2: f64, beta: f64, offset: f64) -> Result<Verdict, String> {
        let a = self.gs.a_star;
        let (v1, v2) = if offset == 0.0 {
            (PotentialSpec::harmonic(1.0), PotentialSpec::harmonic(1.0))
        } else {
            (PotentialSpec::shifted_well(-offset, 1.0), PotentialSpec::shifted_well(offset, 1.0))
        };
        let params = SystemParams::new(a1 * a, a2 * a, beta * a, v1, v2)
            .map_err(|e| e.to_string())?
            .with_edge_min(10.0);
        let c = classify(&params, &self.gs, &self.grid, &SolverOptions::default(), &ClassifyOptions::default())
            .map_err(|e| e.to_string())?;
        Ok(Verdict {
            verdict: c.verdict.to_string(),
            rule: c.rule,
            gamma: c.gamma.map(|g| g.value),
            beta_lower: c.thresholds.beta_lower.map(|b| b / a),
            beta_upper: c.thresholds.beta_upper / a,
        })
    }
}

#[wasm_bindgen]
impl Demo {
    /// Solves for the ground state on `[-L, L)` with `n` points.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, half_length: f64) -> Result<Demo, JsError> {
        Self::solve(n, half_length).map_err(js_err)
    }

    /// `{a_star, pohozaev, iterations, xs, q}`.
    pub fn profile(&self) -> Result<String, JsError> {
        serde_json::to_string(&self.profile_data()).map_err(js_err)
    }

    /// `{thresholds, ts, kappa, inf, t_min}`.
    pub fn kappa_curve(&self, a1: f64, a2: f64, beta: f64, points: usize) -> Result<String, JsError> {
        let data = self.kappa_data(a1, a2, beta, points).map_err(js_err)?;
        serde_json::to_string(&data).map_err(js_err)
    }

    /// `{verdict, rule, gamma, beta_lower, beta_upper}`.
    pub fn classify(&self, a1: f64, a2: f64, beta: f64, offset: f64) -> Result<String, JsError> {
        let data = self.classify_data(a1, a2, beta, offset).map_err(js_err)?;
        serde_json::to_string(&data).map_err(js_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Demo {
        Demo::solve(256, 16.0).unwrap()
    }

    #[test]
    fn operations_round_trip() {
        let d = demo();
        assert!((d.a_star() - 2.4693).abs() < 2e-3);
        let p = d.profile_data();
        assert_eq!(p.xs.len(), 256);
        assert!(p.pohozaev < 1e-3);

        let k = d.kappa_data(0.3, 0.6, 0.2, 50).unwrap();
        assert_eq!(k.kappa.len(), 50);
        assert!(k.kappa.iter().all(|&v| v >= k.inf - 1e-12));

        let v = d.classify_data(0.3, 0.4, 0.1, 0.0).unwrap();
        assert_eq!((v.verdict.as_str(), v.rule.as_str()), ("Exists", "Thm 1.1(i)"));
        let v = d.classify_data(1.2, 0.4, 0.1, 0.0).unwrap();
        assert_eq!(v.verdict, "NotExists");
        assert!(d.classify_data(-1.0, 0.4, 0.1, 0.0).is_err());
    }
}
