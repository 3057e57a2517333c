//! Dynamical scaling of the marginals along `n = Λ(z₀ t^β)`.
//!
//! For `Λ'(x)/Λ(x) ≈ c/x` the scaled marginal `n·P_β(n,t)` tends to
//! `(z₀/c)·M_β(z₀)` as `n → ∞` on that curve. For `Λ(x) = x^r` this reads
//! `t^{rβ}·P_β(n,t) → z₀^{1−r}/r · M_β(z₀)`. The ordinary Poisson process
//! (`β = 1`) has no such limit: `t^{1/2}·P_1(n, n/z₀)` tends to `1/√(2π)` for
//! `z₀ = 1` and to zero otherwise.

use libm::lgamma as ln_gamma;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::marginals::{check_tol, marginal, MarginalQuery, TOL_RANGE};
use crate::special_fn::{mwright, OrderParam, SeriesEvalConfig};

/// Largest count accepted by the scaling harness.
pub const MAX_SCALING_N: u64 = 4096;

/// Relative accuracy demanded of the curve constraint `Λ(z₀ t^β) = n`.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub n: u64,
    /// Solves `n = Λ(z₀ t^β)`.
    pub t: f64,
    pub marginal: f64,
    /// `n·P_β(n,t)` for [`scaling_curve`], `t^{rβ}·P_β(n,t)` for [`corollary_curve`].
    pub scaled_value: f64,
    pub limit_value: f64,
    pub abs_gap: f64,
    /// Error estimate of `scaled_value`.
    pub abs_err_est: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCurve {
    pub beta: OrderParam,
    pub model: IntensityModel,
    pub z0: f64,
    pub points: Vec<ScalingPoint>,
}

fn check_z0(z0: f64) -> Result<()> {
    if z0 > 0.0 && z0.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "z0 must be positive and finite, got {z0}"
        )))
    }
}

/// Tolerance for one marginal whose scaled value must meet `tol`.
fn marginal_tol(tol: f64, factor: f64) -> Result<f64> {
    let per = tol / factor;
    if per > TOL_RANGE.0 {
        Ok(per)
    } else {
        Err(Error::ToleranceNotMet {
            requested: tol,
            achieved: factor * TOL_RANGE.0,
            n_evals: 0,
        })
    }
}

fn check_counts(n_list: &[u64]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::domain("count list is empty"));
    }
    if n_list[0] == 0 {
        return Err(Error::domain("counts must be positive"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("counts must be strictly increasing"));
    }
    if let Some(&last) = n_list.last() {
        if last > MAX_SCALING_N {
            return Err(Error::domain(format!(
                "counts above {MAX_SCALING_N} are not supported, got {last}"
            )));
        }
    }
    Ok(())
}

/// Time on the curve `n = Λ(z₀ t^β)`, checked against the constraint.
pub fn curve_time(model: &IntensityModel, beta: OrderParam, z0: f64, n: u64) -> Result<f64> {
    check_z0(z0)?;
    let nf = n as f64;
    let x = model
        .invert(nf)
        .map_err(|e| Error::Constraint(format!("cannot solve Λ(x) = {n}: {e}")))?;
    let t = (x / z0).powf(1.0 / beta.value());
    let achieved = model.cumulative(z0 * t.powf(beta.value()));
    if !t.is_finite() || !(t > 0.0) || (achieved - nf).abs() > CONSTRAINT_TOL * nf {
        return Err(Error::Constraint(format!(
            "curve time for n={n}, z0={z0} misses the constraint: Λ = {achieved}"
        )));
    }
    Ok(t)
}

/// `(z₀/c)·M_β(z₀)`.
pub fn scaling_limit(beta: OrderParam, model: &IntensityModel, z0: f64) -> Result<f64> {
    check_z0(z0)?;
    let m = mwright(beta, z0, &SeriesEvalConfig::default())?;
    Ok(z0 / model.scaling_constant() * m)
}

/// `n·P_β(n,t)` along `n = Λ(z₀ t^β)` against its limit. Each marginal is
/// computed to `tol/n` so that the scaled value meets `tol`.
pub fn scaling_curve(
    beta: OrderParam,
    model: IntensityModel,
    z0: f64,
    n_list: &[u64],
    tol: f64,
) -> Result<ScalingCurve> {
    beta.require_fractional()?;
    check_z0(z0)?;
    check_tol(tol)?;
    check_counts(n_list)?;
    let limit = scaling_limit(beta, &model, z0)?;
    let points = n_list
        .par_iter()
        .map(|&n| {
            let t = curve_time(&model, beta, z0, n)?;
            let nf = n as f64;
            let r = marginal(
                &MarginalQuery::new(n, t, beta, model)?,
                marginal_tol(tol, nf)?,
            )?;
            let scaled = nf * r.value;
            Ok(ScalingPoint {
                n,
                t,
                marginal: r.value,
                scaled_value: scaled,
                limit_value: limit,
                abs_gap: (scaled - limit).abs(),
                abs_err_est: nf * r.abs_err_est,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingCurve {
        beta,
        model,
        z0,
        points,
    })
}

/// The power-law form: `Λ(x) = x^r`, `t^{rβ}·P_β(n,t)` against
/// `z₀^{1−r}/r · M_β(z₀)`. Each `t` is mapped to the nearest integer
/// `n = z₀^r t^{rβ}` and then re-solved exactly from that `n`; times that
/// round to an already used `n` are skipped.
pub fn corollary_curve(
    beta: OrderParam,
    r: f64,
    z0: f64,
    t_list: &[f64],
    tol: f64,
) -> Result<ScalingCurve> {
    let b = beta.require_fractional()?;
    check_z0(z0)?;
    check_tol(tol)?;
    let model = IntensityModel::power_law(r, 1.0)?;
    if t_list.is_empty() {
        return Err(Error::domain("time list is empty"));
    }
    if t_list.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::domain("times must be positive and finite"));
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("times must be strictly increasing"));
    }
    let mut counts: Vec<u64> = Vec::new();
    for &t in t_list {
        let n = (z0.powf(r) * t.powf(r * b)).round();
        if n < 1.0 {
            continue;
        }
        let n = n as u64;
        if counts.last() != Some(&n) {
            counts.push(n);
        }
    }
    if counts.is_empty() {
        return Err(Error::domain("every time maps to a zero count"));
    }
    check_counts(&counts)?;
    let m = mwright(beta, z0, &SeriesEvalConfig::default())?;
    let limit = z0.powf(1.0 - r) / r * m;
    let points = counts
        .par_iter()
        .map(|&n| {
            let t = curve_time(&model, beta, z0, n)?;
            let factor = t.powf(r * b);
            // same per-marginal tolerance as `scaling_curve` whenever z₀ ≥ 1
            let q = marginal(
                &MarginalQuery::new(n, t, beta, model)?,
                marginal_tol(tol, factor.max(n as f64))?,
            )?;
            let scaled = factor * q.value;
            Ok(ScalingPoint {
                n,
                t,
                marginal: q.value,
                scaled_value: scaled,
                limit_value: limit,
                abs_gap: (scaled - limit).abs(),
                abs_err_est: factor * q.abs_err_est,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingCurve {
        beta,
        model,
        z0,
        points,
    })
}

/// One row of the ordinary Poisson comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonPoint {
    pub n: u64,
    /// `n / z₀`
    pub t: f64,
    /// `t^{1/2}·e^{−t} t^n / n!`
    pub scaled_value: f64,
}

/// `t^{1/2} P_1(n, t)` at `t = n/z₀`, in log space.
pub fn poisson_degenerate(n_list: &[u64], z0: f64) -> Result<Vec<PoissonPoint>> {
    check_z0(z0)?;
    check_counts(n_list)?;
    Ok(n_list
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let t = nf / z0;
            let ln_v = 0.5 * t.ln() + nf * t.ln() - t - ln_gamma(nf + 1.0);
            PoissonPoint {
                n,
                t,
                scaled_value: ln_v.exp(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn beta(b: f64) -> OrderParam {
        OrderParam::new(b).unwrap()
    }

    #[test]
    fn curve_time_satisfies_constraint() {
        let b = beta(0.5);
        let m = IntensityModel::power_law(2.0, 1.0).unwrap();
        let t = curve_time(&m, b, 1.0, 64).unwrap();
        assert!((m.cumulative(t.sqrt()) - 64.0).abs() < 1e-9 * 64.0);
        assert!((t - 64.0).abs() < 1e-9);
        assert!(curve_time(&m, b, 0.0, 64).is_err());
    }

    #[test]
    fn limits() {
        let b = beta(0.5);
        let lin = scaling_limit(b, &IntensityModel::unit(), 1.0).unwrap();
        assert!((lin - 0.439_391_289_467_722_4).abs() < 1e-12);
        let pl = scaling_limit(b, &IntensityModel::power_law(2.0, 1.0).unwrap(), 1.0).unwrap();
        assert!((pl - 0.219_695_644_733_861_2).abs() < 1e-12);
    }

    #[test]
    fn list_validation() {
        let b = beta(0.5);
        let m = IntensityModel::unit();
        assert!(scaling_curve(b, m, 1.0, &[], 1e-8).is_err());
        assert!(scaling_curve(b, m, 1.0, &[16, 16], 1e-8).is_err());
        assert!(scaling_curve(b, m, 1.0, &[8192], 1e-8).is_err());
        assert!(scaling_curve(b, m, 1.0, &[0, 4], 1e-8).is_err());
        assert!(scaling_curve(beta(1.0), m, 1.0, &[16], 1e-8).is_err());
        assert!(matches!(
            scaling_curve(b, m, 1.0, &[16], 1e-15),
            Err(Error::Domain(_))
        ));
        let strict = scaling_curve(b, m, 1.0, &[4096], 1e-11);
        assert!(matches!(strict, Err(Error::ToleranceNotMet { .. })));
    }

    #[test]
    fn linear_curve_approaches_limit() {
        let c =
            scaling_curve(beta(0.5), IntensityModel::unit(), 1.0, &[16, 64, 256], 1e-8).unwrap();
        let gaps: Vec<f64> = c.points.iter().map(|p| p.abs_gap).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        assert!(gaps[2] < 0.01);
        for p in &c.points {
            assert_eq!(p.abs_gap, (p.scaled_value - p.limit_value).abs());
        }
    }

    #[test]
    fn corollary_rounds_and_resolves() {
        let c = corollary_curve(beta(0.5), 1.0, 2.0, &[4.0, 4.01, 100.0], 1e-8).unwrap();
        // 4 and 4.01 both round to n = 4
        assert_eq!(
            c.points.iter().map(|p| p.n).collect::<Vec<_>>(),
            vec![4, 20]
        );
        for p in &c.points {
            assert!((2.0 * p.t.sqrt() - p.n as f64).abs() < 1e-9 * p.n as f64);
        }
        assert!((c.points[0].limit_value - (-1.0f64).exp() / PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn poisson_dichotomy() {
        let one = poisson_degenerate(&[4, 1024], 1.0).unwrap();
        let target = 1.0 / (2.0 * PI).sqrt();
        assert!((one[1].scaled_value - target).abs() < 1e-3);
        // Stirling: relative gap ≈ 1/(12n)
        let rel = 1.0 - one[0].scaled_value / target;
        assert!((rel - 1.0 / 48.0).abs() < 2e-3, "{rel}");
        let two = poisson_degenerate(&[1024], 2.0).unwrap();
        assert!(two[0].scaled_value < 1e-40);
        let half = poisson_degenerate(&[1024], 0.5).unwrap();
        assert!(half[0].scaled_value < 1e-40);
    }
}
