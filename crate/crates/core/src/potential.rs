//! Trapping potentials sampled on a grid.
//!
//! A [`PotentialSpec`] is a formula; [`Potential::resolve`] samples it,
//! subtracts the grid minimum so that `min V = 0`, and checks that the box
//! edge sits at least `edge_min` above the floor, which stands in for
//! `V → ∞` on the truncated domain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::Grid1D;

/// Default lower bound for `V` at the box edge.
pub const DEFAULT_EDGE_MIN: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("invalid potential parameters: {0}")]
    BadParameters(String),
    #[error("potential is not finite at x = {0}")]
    NonFinite(f64),
    #[error("edge value {edge:e} below required {required:e}: the trap does not confine on this box")]
    EdgeTooLow { edge: f64, required: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `ω²x²/2`.
    Harmonic {
        #[serde(default = "one")]
        omega: f64,
    },
    /// `s|x|^p`.
    Power {
        p: f64,
        #[serde(default = "one")]
        strength: f64,
    },
    /// `ω²(x - x0)²/2`.
    ShiftedWell {
        x0: f64,
        #[serde(default = "one")]
        omega: f64,
    },
    /// `s(x² - b²)²`, minimal at `±b`.
    DoubleWell {
        b: f64,
        #[serde(default = "one")]
        strength: f64,
    },
    /// Piecewise-linear through `(xs, values)`, constant beyond the ends.
    CustomTable { xs: Vec<f64>, values: Vec<f64> },
    /// `V = 0`. Does not trap; only passes with `edge_min = 0`.
    Flat,
}

fn one() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn harmonic(omega: f64) -> Self {
        Self::Harmonic { omega }
    }

    pub fn shifted_well(x0: f64, omega: f64) -> Self {
        Self::ShiftedWell { x0, omega }
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        let bad = |m: &str| Err(PotentialError::BadParameters(m.into()));
        let finite = |v: f64| v.is_finite();
        match self {
            Self::Harmonic { omega } | Self::ShiftedWell { omega, .. } if !finite(*omega) => {
                bad("omega must be finite")
            }
            Self::ShiftedWell { x0, .. } if !finite(*x0) => bad("x0 must be finite"),
            Self::Power { p, strength } if !(finite(*p) && *p > 0.0 && finite(*strength) && *strength >= 0.0) => {
                bad("power needs p > 0 and strength >= 0")
            }
            Self::DoubleWell { b, strength } if !(finite(*b) && finite(*strength) && *strength >= 0.0) => {
                bad("double well needs finite b and strength >= 0")
            }
            Self::CustomTable { xs, values } => {
                if xs.len() < 2 || xs.len() != values.len() {
                    return bad("table needs at least two points and matching lengths");
                }
                if !xs.windows(2).all(|w| w[0] < w[1]) {
                    return bad("table abscissae must increase strictly");
                }
                if !xs.iter().chain(values).all(|v| v.is_finite()) {
                    return bad("table entries must be finite");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Formula value before the grid minimum is subtracted.
    pub fn raw(&self, x: f64) -> f64 {
        match self {
            Self::Harmonic { omega } => 0.5 * omega * omega * x * x,
            Self::Power { p, strength } => strength * x.abs().powf(*p),
            Self::ShiftedWell { x0, omega } => 0.5 * omega * omega * (x - x0).powi(2),
            Self::DoubleWell { b, strength } => strength * (x * x - b * b).powi(2),
            Self::CustomTable { xs, values } => table(xs, values, x),
            Self::Flat => 0.0,
        }
    }
}

fn table(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[last] {
        return values[last];
    }
    let i = xs.partition_point(|&t| t <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    values[i] + w * (values[i + 1] - values[i])
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Harmonic { omega } => write!(f, "harmonic:{omega}"),
            Self::Power { p, strength } => write!(f, "power:{p}:{strength}"),
            Self::ShiftedWell { x0, omega } => write!(f, "shifted-well:{x0}:{omega}"),
            Self::DoubleWell { b, strength } => write!(f, "double-well:{b}:{strength}"),
            Self::CustomTable { xs, .. } => write!(f, "custom-table[{}]", xs.len()),
            Self::Flat => f.write_str("flat"),
        }
    }
}

/// Parses `kind[:param[:param]]`, e.g. `harmonic`, `harmonic:0.5`,
/// `power:4`, `shifted-well:3`, `double-well:2:0.1`, `flat`.
impl FromStr for PotentialSpec {
    type Err = PotentialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default().replace('_', "-");
        let nums: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| PotentialError::BadParameters(format!("bad number `{p}` in `{s}`")))
            })
            .collect::<Result<_, _>>()?;
        let arg = |i: usize, default: Option<f64>| {
            nums.get(i).copied().or(default).ok_or_else(|| {
                PotentialError::BadParameters(format!("`{kind}` needs parameter {}", i + 1))
            })
        };
        let max_args = match kind.as_str() {
            "flat" => 0,
            "harmonic" => 1,
            _ => 2,
        };
        if nums.len() > max_args {
            return Err(PotentialError::BadParameters(format!("too many parameters in `{s}`")));
        }
        let spec = match kind.as_str() {
            "harmonic" => Self::Harmonic {
                omega: arg(0, Some(1.0))?,
            },
            "power" => Self::Power {
                p: arg(0, None)?,
                strength: arg(1, Some(1.0))?,
            },
            "shifted-well" => Self::ShiftedWell {
                x0: arg(0, None)?,
                omega: arg(1, Some(1.0))?,
            },
            "double-well" => Self::DoubleWell {
                b: arg(0, None)?,
                strength: arg(1, Some(1.0))?,
            },
            "flat" => Self::Flat,
            other => {
                return Err(PotentialError::BadParameters(format!(
                    "unknown potential `{other}` (harmonic, power, shifted-well, double-well, flat)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A potential sampled on a grid with its minimum shifted to zero.
#[derive(Debug, Clone)]
pub struct Potential {
    spec: PotentialSpec,
    values: Vec<f64>,
    offset: f64,
    minimizers: Vec<f64>,
}

impl Potential {
    pub fn resolve(spec: &PotentialSpec, grid: &Grid1D, edge_min: f64) -> Result<Self, PotentialError> {
        spec.validate()?;
        let xs = grid.xs();
        let mut raw = Vec::with_capacity(xs.len());
        for &x in &xs {
            let v = spec.raw(x);
            if !v.is_finite() {
                return Err(PotentialError::NonFinite(x));
            }
            raw.push(v);
        }
        let offset = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let values: Vec<f64> = raw.iter().map(|v| v - offset).collect();
        let scale = values.iter().cloned().fold(0.0, f64::max).max(1.0);
        let minimizers = xs
            .iter()
            .zip(&values)
            .filter(|(_, &v)| v <= 1e-12 * scale)
            .map(|(&x, _)| x)
            .collect();
        let edge = values[0].min(values[values.len() - 1]);
        if edge < edge_min {
            return Err(PotentialError::EdgeTooLow {
                edge,
                required: edge_min,
            });
        }
        Ok(Self {
            spec: spec.clone(),
            values,
            offset,
            minimizers,
        })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Shifted value at an arbitrary point.
    pub fn eval(&self, x: f64) -> f64 {
        self.spec.raw(x) - self.offset
    }

    /// Grid points where the minimum is attained.
    pub fn minimizers(&self) -> &[f64] {
        &self.minimizers
    }

    /// The amount subtracted from the formula.
    pub fn offset(&self) -> f64 {
        self.offset
    }
}
