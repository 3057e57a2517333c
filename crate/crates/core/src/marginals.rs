//! Marginal probabilities `P_β(n, t)` of the fractional non-homogeneous
//! Poisson process.
//!
//! The main route integrates the Poisson weight `e^{−Λ}Λ^n/n!` at
//! `Λ = Λ(z t^β)` against the M-Wright density over `z ∈ [0, z_max]`. The
//! reported error is the sum of three parts:
//!
//! * the Gauss–Kronrod estimate,
//! * the series error of `M_β` integrated against the Poisson weight,
//! * a rigorous bound on the omitted tail `z > z_max`, from
//!   [`mwright_tail_bound`] times the supremum of the weight beyond `z_max`.
//!
//! `z_max` is the first point of a geometric scan where the tail bound drops
//! below a tenth of the tolerance, or where extending the domain would add
//! more series error than it removes tail.

use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::quadrature::{integrate_vec, QuadConfig};
use crate::special_fn::{mwright_series, mwright_tail_bound, OrderParam, SeriesEvalConfig};
use rug::ops::Pow;
use rug::Float;

/// Accepted open range for requested tolerances.
pub const TOL_RANGE: (f64, f64) = (1e-14, 1e-2);

const MAX_EVALS: usize = 400_000;
const Z_SCAN_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalQuery {
    pub n: u64,
    pub t: f64,
    pub beta: OrderParam,
    pub model: IntensityModel,
}

impl MarginalQuery {
    pub fn new(n: u64, t: f64, beta: OrderParam, model: IntensityModel) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!(
                "time must be finite and >= 0, got {t}"
            )));
        }
        Ok(Self { n, t, beta, model })
    }
}

/// Result of one marginal evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureReport {
    pub value: f64,
    /// `quad_err + series_err + tail_bound`
    pub abs_err_est: f64,
    pub quad_err: f64,
    pub series_err: f64,
    pub tail_bound: f64,
    /// Upper integration limit in the `z` variable; zero for the `t = 0` short cut.
    pub z_max: f64,
    pub n_evals: usize,
}

impl QuadratureReport {
    fn exact(value: f64) -> Self {
        Self {
            value,
            abs_err_est: 0.0,
            quad_err: 0.0,
            series_err: 0.0,
            tail_bound: 0.0,
            z_max: 0.0,
            n_evals: 0,
        }
    }
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if tol > TOL_RANGE.0 && tol < TOL_RANGE.1 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "tolerance must lie in ({:e}, {:e}), got {tol:e}",
            TOL_RANGE.0, TOL_RANGE.1
        )))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "time must be finite and >= 0, got {t}"
        )))
    }
}

/// `ln(e^{−Λ} Λ^n / n!)` given `ln Λ`.
#[inline]
fn ln_pmf(n: u64, ln_lambda: f64, ln_factorial: f64) -> f64 {
    if n == 0 {
        -ln_lambda.exp()
    } else {
        n as f64 * ln_lambda - ln_lambda.exp() - ln_factorial
    }
}

/// Poisson probability `e^{−Λ} Λ^n / n!`, evaluated in log space.
pub fn poisson_pmf(n: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    ln_pmf(n, lambda.ln(), ln_gamma(n as f64 + 1.0)).exp()
}

/// Upper bound on `P(X ≥ k)` for `X ~ Poisson(Λ)`.
pub fn poisson_upper_tail_bound(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let kf = k as f64;
    if kf <= lambda + 1.0 {
        return 1.0;
    }
    // successive ratios Λ/(j+1) ≤ Λ/(k+1) < 1 beyond k
    let q = lambda / (kf + 1.0);
    (poisson_pmf(k, lambda) / (1.0 - q)).min(1.0)
}

/// `sup_{Λ ≥ lambda} e^{−Λ}Λ^n/n!`.
fn pmf_sup_beyond(n: u64, lambda: f64) -> f64 {
    if lambda >= n as f64 {
        poisson_pmf(n, lambda)
    } else {
        poisson_pmf(n, n as f64)
    }
}

/// Everything needed to integrate a family of Poisson-type weights against `M_β`.
struct WeightedProblem<'a> {
    beta: OrderParam,
    /// number of tracked output components
    dim: usize,
    /// fills `out[..dim]` with the weights at `z`
    weights: &'a (dyn Fn(f64, &mut [f64]) + Sync),
    /// `sup_{z ≥ Z}` of the largest weight
    weight_sup_beyond: &'a (dyn Fn(f64) -> f64 + Sync),
    /// points where the weights change quickly
    seeds: Vec<f64>,
    /// where the z scan starts
    z_start: f64,
}

struct WeightedOutcome {
    values: Vec<f64>,
    quad_errs: Vec<f64>,
    series_err: f64,
    tail_bound: f64,
    z_max: f64,
    n_evals: usize,
    converged: bool,
}

fn integrand_series_cfg(tol: f64) -> SeriesEvalConfig {
    SeriesEvalConfig::for_integrand((tol * 1e-3).max(1e-17))
}

/// Scans `Z` upward until the tail bound beyond `Z` is negligible or further
/// extension would cost more series error than it saves.
fn choose_z_max(p: &WeightedProblem<'_>, tol: f64, cfg: &SeriesEvalConfig) -> Result<(f64, f64)> {
    let tail_tol = 0.1 * tol;
    let mut z = p.z_start.max(0.25);
    let mut last_good: Option<(f64, f64)> = None;
    loop {
        let tail = (p.weight_sup_beyond)(z) * mwright_tail_bound(p.beta, 0.0, z);
        let err_density = match mwright_series(p.beta, z, cfg) {
            Ok(sv) => sv.abs_err,
            Err(Error::NonConvergence { .. }) | Err(Error::PrecisionLoss { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if !err_density.is_finite() {
            // M_β cannot be summed here; keep the last point where it could
            return last_good.ok_or_else(|| Error::PrecisionLoss {
                what: format!("M-Wright series unusable at z={z}"),
                ratio: f64::INFINITY,
            });
        }
        if tail <= tail_tol {
            return Ok((z, tail));
        }
        let step = 0.05 * z + 0.05;
        if err_density * (p.weight_sup_beyond)(z) * step >= tail {
            return Ok((z, tail));
        }
        last_good = Some((z, tail));
        z += step;
        if z > Z_SCAN_LIMIT {
            return Err(Error::ToleranceNotMet {
                requested: tol,
                achieved: tail,
                n_evals: 0,
            });
        }
    }
}

fn integrate_weighted(p: &WeightedProblem<'_>, tol: f64) -> Result<WeightedOutcome> {
    let cfg = integrand_series_cfg(tol);
    let (z_max, tail_bound) = choose_z_max(p, tol, &cfg)?;

    let mut points: Vec<f64> = p
        .seeds
        .iter()
        .copied()
        .filter(|&s| s.is_finite() && s > 0.0 && s < z_max)
        .collect();
    points.push(0.0);
    points.push(z_max);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-12));

    let dim = p.dim;
    // component `dim` carries |M error| times the largest weight
    let integrand = |z: f64, out: &mut [f64]| -> Result<()> {
        let m = mwright_series(p.beta, z, &cfg)?;
        (p.weights)(z, &mut out[..dim]);
        let mut wmax: f64 = 0.0;
        for w in out[..dim].iter_mut() {
            wmax = wmax.max(w.abs());
            *w *= m.value;
        }
        out[dim] = wmax * m.abs_err;
        Ok(())
    };
    let quad_cfg = QuadConfig {
        abs_tol: 0.5 * tol,
        rel_tol: 0.0,
        max_evals: MAX_EVALS,
    };
    let out = integrate_vec(integrand, dim + 1, dim, &points, &quad_cfg)?;
    Ok(WeightedOutcome {
        values: out.values[..dim].to_vec(),
        quad_errs: out.errors[..dim].to_vec(),
        series_err: out.values[dim].abs(),
        tail_bound,
        z_max,
        n_evals: out.n_evals,
        converged: out.converged,
    })
}

fn finish_report(
    value: f64,
    quad_err: f64,
    w: &WeightedOutcome,
    tol: f64,
) -> Result<QuadratureReport> {
    let report = QuadratureReport {
        value,
        abs_err_est: quad_err + w.series_err + w.tail_bound,
        quad_err,
        series_err: w.series_err,
        tail_bound: w.tail_bound,
        z_max: w.z_max,
        n_evals: w.n_evals,
    };
    if report.abs_err_est <= tol {
        return Ok(report);
    }
    if w.converged && w.series_err + w.tail_bound > 0.5 * tol {
        // the quadrature is fine; M_β cannot be summed accurately enough
        // where the integrand still matters
        return Err(Error::PrecisionLoss {
            what: format!(
                "M-Wright series error {:e} plus tail {:e} exceed tolerance {tol:e}",
                w.series_err, w.tail_bound
            ),
            ratio: (w.series_err + w.tail_bound) / tol,
        });
    }
    Err(Error::ToleranceNotMet {
        requested: tol,
        achieved: report.abs_err_est,
        n_evals: w.n_evals,
    })
}

/// `z` values where `Λ(z t^β)` sits a few Poisson standard deviations from `n`.
fn peak_seeds(model: &IntensityModel, t_beta: f64, n: u64) -> Vec<f64> {
    let nf = n as f64;
    let sd = nf.max(1.0).sqrt();
    [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|k| nf + k * sd)
        .filter(|&y| y > 0.0)
        .filter_map(|y| model.invert(y).ok())
        .map(|x| x / t_beta)
        .collect()
}

/// `z` where the Poisson weight for `n` peaks, i.e. the solution of
/// `n = Λ(z t^β)`. Zero for `n = 0`.
pub fn saddle_point(model: &IntensityModel, beta: OrderParam, t: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    Ok(model.invert(n as f64)? / t.powf(beta.value()))
}

/// `P_β(n, t) = ∫₀^∞ e^{−Λ(z t^β)} Λ(z t^β)^n / n! · M_β(z) dz`.
pub fn marginal(query: &MarginalQuery, tol: f64) -> Result<QuadratureReport> {
    check_tol(tol)?;
    check_time(query.t)?;
    let beta = query.beta;
    beta.require_fractional()?;
    let n = query.n;
    if query.t == 0.0 {
        return Ok(QuadratureReport::exact(if n == 0 { 1.0 } else { 0.0 }));
    }
    let model = query.model;
    let t_beta = query.t.powf(beta.value());
    let ln_t_beta = beta.value() * query.t.ln();
    let ln_fact = ln_gamma(n as f64 + 1.0);

    let weights = move |z: f64, out: &mut [f64]| {
        out[0] = if z == 0.0 {
            if n == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            let ln_lambda = model.ln_cumulative((z.ln() + ln_t_beta).exp());
            ln_pmf(n, ln_lambda, ln_fact).exp()
        };
    };
    let sup_beyond = move |z: f64| pmf_sup_beyond(n, model.cumulative(z * t_beta));
    let zpk = saddle_point(&model, beta, query.t, n)?;
    let problem = WeightedProblem {
        beta,
        dim: 1,
        weights: &weights,
        weight_sup_beyond: &sup_beyond,
        seeds: peak_seeds(&model, t_beta, n),
        z_start: zpk,
    };
    let w = integrate_weighted(&problem, tol)?;
    finish_report(w.values[0], w.quad_errs[0], &w, tol)
}

/// The fractional Poisson marginal (`λ ≡ 1`) in subordination form,
/// `(t^{nβ}/n!) ∫₀^∞ z^n e^{−z t^β} M_β(z) dz`.
pub fn marginal_subordination(
    n: u64,
    t: f64,
    beta: OrderParam,
    tol: f64,
) -> Result<QuadratureReport> {
    check_tol(tol)?;
    check_time(t)?;
    beta.require_fractional()?;
    if t == 0.0 {
        return Ok(QuadratureReport::exact(if n == 0 { 1.0 } else { 0.0 }));
    }
    let b = beta.value();
    let nf = n as f64;
    let t_beta = t.powf(b);
    let ln_prefactor = nf * b * t.ln() - ln_gamma(nf + 1.0);

    let weights = move |z: f64, out: &mut [f64]| {
        out[0] = if n == 0 {
            (-z * t_beta).exp()
        } else if z == 0.0 {
            0.0
        } else {
            (ln_prefactor + nf * z.ln() - z * t_beta).exp()
        };
    };
    let sup_beyond = move |z: f64| pmf_sup_beyond(n, z * t_beta);
    let model = IntensityModel::unit();
    let problem = WeightedProblem {
        beta,
        dim: 1,
        weights: &weights,
        weight_sup_beyond: &sup_beyond,
        seeds: peak_seeds(&model, t_beta, n),
        z_start: nf / t_beta,
    };
    let w = integrate_weighted(&problem, tol)?;
    finish_report(w.values[0], w.quad_errs[0], &w, tol)
}

/// `P_β(n, t)` for `n = 0..=n_max`, sharing one set of quadrature panels.
pub fn distribution(
    t: f64,
    beta: OrderParam,
    model: IntensityModel,
    n_max: u64,
    tol: f64,
) -> Result<Vec<QuadratureReport>> {
    check_tol(tol)?;
    check_time(t)?;
    beta.require_fractional()?;
    if t == 0.0 {
        return Ok((0..=n_max)
            .map(|n| QuadratureReport::exact(if n == 0 { 1.0 } else { 0.0 }))
            .collect());
    }
    let dim = usize::try_from(n_max)
        .ok()
        .and_then(|d| d.checked_add(1))
        .ok_or_else(|| Error::domain("n_max too large"))?;
    let t_beta = t.powf(beta.value());
    let ln_t_beta = beta.value() * t.ln();
    let ln_facts: Vec<f64> = (0..=n_max).map(|n| ln_gamma(n as f64 + 1.0)).collect();

    let weights = |z: f64, out: &mut [f64]| {
        if z == 0.0 {
            out.fill(0.0);
            out[0] = 1.0;
            return;
        }
        let ln_lambda = model.ln_cumulative((z.ln() + ln_t_beta).exp());
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = ln_pmf(n as u64, ln_lambda, ln_facts[n]).exp();
        }
    };
    let sup_beyond = |z: f64| {
        let lambda = model.cumulative(z * t_beta);
        if lambda <= n_max as f64 {
            1.0
        } else {
            // every pmf with n ≤ n_max is already decreasing here
            (0..=n_max)
                .map(|n| poisson_pmf(n, lambda))
                .fold(0.0, f64::max)
        }
    };
    let mut seeds = Vec::new();
    let mut n = n_max;
    loop {
        seeds.extend(peak_seeds(&model, t_beta, n));
        if n == 0 {
            break;
        }
        n /= 2;
    }
    let zpk = saddle_point(&model, beta, t, n_max)?;
    let problem = WeightedProblem {
        beta,
        dim,
        weights: &weights,
        weight_sup_beyond: &sup_beyond,
        seeds,
        z_start: zpk,
    };
    let w = integrate_weighted(&problem, tol)?;
    (0..dim)
        .map(|i| finish_report(w.values[i], w.quad_errs[i], &w, tol))
        .collect()
}

/// Upper bound on `Σ_{n > n_max} P_β(n, t)`, the probability mass a
/// [`distribution`] call up to `n_max` leaves out.
pub fn count_tail_bound(t: f64, beta: OrderParam, model: &IntensityModel, n_max: u64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let t_beta = t.powf(beta.value());
    // split at Z: for z ≤ Z the Poisson tail is at most its value at Z
    let mut best = 1.0f64;
    let mut z = 0.25;
    while z < 1e4 {
        let b = poisson_upper_tail_bound(n_max + 1, model.cumulative(z * t_beta))
            + mwright_tail_bound(beta, 0.0, z);
        best = best.min(b);
        z *= 1.05;
    }
    best
}

/// Smallest `n_max` whose [`count_tail_bound`] is below `eps`.
pub fn truncation_count(t: f64, beta: OrderParam, model: &IntensityModel, eps: f64) -> Result<u64> {
    let mut n = 0u64;
    while count_tail_bound(t, beta, model, n) >= eps {
        n = if n < 8 { n + 1 } else { n + n / 8 };
        if n > 1_000_000 {
            return Err(Error::domain(format!(
                "no count truncation reaches {eps:e} at t={t}"
            )));
        }
    }
    Ok(n)
}

/// Closed-form solution of the fractional Kolmogorov-Feller equations with
/// `λ = 1`, summed as a power series in `x = t^β`:
///
/// `P_β(n,t) = Σ_{k≥0} (−1)^k (n+k)!/(n! k!) · x^{n+k} / Γ(β(n+k)+1)`.
///
/// The series alternates and its largest term can exceed the sum by many
/// orders of magnitude, so it is summed in MPFR arithmetic with enough bits to
/// absorb that cancellation. The precision comes from a first pass over the
/// log-magnitudes; if more than [`ORACLE_MAX_BITS`] would be needed the
/// oracle reports [`Error::PrecisionLoss`] and the caller should use a
/// smaller `t`. Independent of the quadrature path; used as a cross-check.
pub fn fpp_series_oracle(n: u64, t: f64, beta: OrderParam) -> Result<f64> {
    const MAX_TERMS: usize = 100_000;
    const TERM_TOL: f64 = 1e-15;
    let b = beta.require_fractional()?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let nf = n as f64;
    let ln_x = b * t.ln();
    let ln_n_fact = ln_gamma(nf + 1.0);

    // pass 1: where to stop and how large the terms get
    let mut ln_max = f64::NEG_INFINITY;
    let mut n_terms = None;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let m = nf + kf;
        let y = b * m + 1.0;
        let ln_mag = ln_gamma(m + 1.0) - ln_n_fact - ln_gamma(kf + 1.0) + m * ln_x - ln_gamma(y);
        ln_max = ln_max.max(ln_mag);
        // Wendel: Γ(y)/Γ(y+β) ≤ y^{−β}(1+β/y)^{1−β}; the resulting ratio bound decreases in k
        let ln_rho =
            ((m + 1.0) / (kf + 1.0)).ln() + ln_x - b * y.ln() + (1.0 - b) * (b / y).ln_1p();
        if ln_rho < 0.0 && ln_mag + ln_rho - (-ln_rho.exp_m1()).ln() < TERM_TOL.ln() {
            n_terms = Some(k + 1);
            break;
        }
    }
    let n_terms = n_terms.ok_or_else(|| Error::NonConvergence {
        what: format!("fractional Poisson series at n={n}, t={t}"),
        max_terms: MAX_TERMS,
    })?;

    // absolute rounding error ≲ n_terms · max_term · 2^{−bits} must stay below 1e-20
    let needed = (ln_max.max(0.0) / std::f64::consts::LN_2
        + (n_terms as f64).log2()
        + 20.0 * std::f64::consts::LOG2_10)
        .ceil()
        + 16.0;
    if needed > ORACLE_MAX_BITS as f64 {
        return Err(Error::PrecisionLoss {
            what: format!("fractional Poisson series at n={n}, t={t} needs {needed} bits"),
            ratio: ln_max.exp(),
        });
    }
    let prec = (needed as u32).max(64);

    // pass 2: the sum itself
    let x = (Float::with_val(prec, t).ln() * b).exp();
    // C(n+k, k) x^{n+k}, starting from x^n
    let n32 = u32::try_from(n)
        .map_err(|_| Error::domain(format!("count {n} too large for the series oracle")))?;
    let mut coeff = x.clone().pow(n32);
    let mut sum = Float::new(prec);
    for k in 0..n_terms {
        let m = n + k as u64;
        let gamma = Float::with_val(prec, Float::with_val(prec, m) * b + 1u32).gamma();
        let term = Float::with_val(prec, &coeff / &gamma);
        if k % 2 == 0 {
            sum += &term;
        } else {
            sum -= &term;
        }
        coeff *= &x;
        coeff *= m + 1;
        coeff /= k as u64 + 1;
    }
    Ok(sum.to_f64())
}

/// Precision cap of [`fpp_series_oracle`], in bits.
pub const ORACLE_MAX_BITS: u32 = 2048;
