//! Cumulative intensity functions `Λ(x) = ∫₀^x λ(u) du`.

use std::fmt;
use std::str::FromStr;

use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};

/// A cumulative intensity with closed-form derivative and inverse.
///
/// Both kinds satisfy `Λ(x) → ∞` and `Λ'(x)/Λ(x) = c/x` exactly, with
/// `c = r` for a power law and `c = 1` for the linear model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntensityModel {
    /// `Λ(x) = scale · x^r`
    PowerLaw { r: f64, scale: f64 },
    /// `Λ(x) = lambda · x`
    Linear { lambda: f64 },
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// One row of a condition-(ii) check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionResidual {
    pub x: f64,
    /// `x·Λ'(x)/Λ(x) − c`
    pub residual: f64,
}

impl IntensityModel {
    pub fn power_law(r: f64, scale: f64) -> Result<Self> {
        Ok(IntensityModel::PowerLaw {
            r: positive("r", r)?,
            scale: positive("scale", scale)?,
        })
    }

    pub fn linear(lambda: f64) -> Result<Self> {
        Ok(IntensityModel::Linear {
            lambda: positive("lambda", lambda)?,
        })
    }

    /// The standard fractional Poisson process, `λ ≡ 1`.
    pub fn unit() -> Self {
        IntensityModel::Linear { lambda: 1.0 }
    }

    /// `Λ(x)` for `x ≥ 0`.
    pub fn cumulative(&self, x: f64) -> f64 {
        match *self {
            IntensityModel::PowerLaw { r, scale } => scale * x.powf(r),
            IntensityModel::Linear { lambda } => lambda * x,
        }
    }

    /// `ln Λ(x)`, accurate where `Λ` itself would under- or overflow.
    pub fn ln_cumulative(&self, x: f64) -> f64 {
        match *self {
            IntensityModel::PowerLaw { r, scale } => scale.ln() + r * x.ln(),
            IntensityModel::Linear { lambda } => lambda.ln() + x.ln(),
        }
    }

    /// The intensity `λ(x) = Λ'(x)`.
    pub fn rate(&self, x: f64) -> f64 {
        match *self {
            IntensityModel::PowerLaw { r, scale } => scale * r * x.powf(r - 1.0),
            IntensityModel::Linear { lambda } => lambda,
        }
    }

    /// The constant `c` in `Λ'(x)/Λ(x) = c/x + O(1/(x log x))`.
    pub fn scaling_constant(&self) -> f64 {
        match *self {
            IntensityModel::PowerLaw { r, .. } => r,
            IntensityModel::Linear { .. } => 1.0,
        }
    }

    /// Solves `Λ(x) = y` for `x`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::domain(format!(
                "intensity inverse needs a positive finite value, got {y}"
            )));
        }
        Ok(match *self {
            IntensityModel::PowerLaw { r, scale } => (y / scale).powf(1.0 / r),
            IntensityModel::Linear { lambda } => y / lambda,
        })
    }

    /// `∫₀^∞ e^{−Λ(x)} Λ(x)^n / n! dx`.
    pub fn pmf_integral(&self, n: u64) -> f64 {
        let nf = n as f64;
        match *self {
            IntensityModel::PowerLaw { r, scale } => {
                (ln_gamma(nf + 1.0 / r) - ln_gamma(nf + 1.0) - scale.ln() / r).exp() / r
            }
            IntensityModel::Linear { lambda } => 1.0 / lambda,
        }
    }

    /// Residuals `x·Λ'(x)/Λ(x) − c` on a grid of positive points.
    pub fn check_condition_ii(&self, x_grid: &[f64]) -> Result<Vec<ConditionResidual>> {
        if x_grid.is_empty() {
            return Err(Error::domain("condition (ii) grid is empty"));
        }
        let c = self.scaling_constant();
        x_grid
            .iter()
            .map(|&x| {
                if !(x > 0.0) || !x.is_finite() {
                    return Err(Error::domain(format!(
                        "condition (ii) grid points must be positive, got {x}"
                    )));
                }
                Ok(ConditionResidual {
                    x,
                    residual: x * self.rate(x) / self.cumulative(x) - c,
                })
            })
            .collect()
    }
}

impl fmt::Display for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensityModel::PowerLaw { r, scale } => write!(f, "powerlaw:r={r},scale={scale}"),
            IntensityModel::Linear { lambda } => write!(f, "linear:lambda={lambda}"),
        }
    }
}

impl FromStr for IntensityModel {
    type Err = Error;

    /// Parses `powerlaw:r=<real>,scale=<real>` or `linear:lambda=<real>`.
    /// Parameters may appear in any order; `scale` defaults to 1.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("model '{s}' is missing ':' after the kind")))?;
        let mut r = None;
        let mut scale = None;
        let mut lambda = None;
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::domain(format!("model parameter '{part}' is not key=value"))
            })?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("model parameter '{part}' is not a number")))?;
            let slot = match (kind.trim(), key.trim()) {
                ("powerlaw", "r") => &mut r,
                ("powerlaw", "scale") => &mut scale,
                ("linear", "lambda") => &mut lambda,
                _ => {
                    return Err(Error::domain(format!(
                        "unknown parameter '{key}' for model kind '{kind}'"
                    )))
                }
            };
            if slot.replace(v).is_some() {
                return Err(Error::domain(format!("parameter '{key}' given twice")));
            }
        }
        match kind.trim() {
            "powerlaw" => IntensityModel::power_law(
                r.ok_or_else(|| Error::domain("powerlaw model needs r=<real>"))?,
                scale.unwrap_or(1.0),
            ),
            "linear" => IntensityModel::linear(
                lambda.ok_or_else(|| Error::domain("linear model needs lambda=<real>"))?,
            ),
            other => Err(Error::domain(format!(
                "unknown model kind '{other}' (expected powerlaw or linear)"
            ))),
        }
    }
}
