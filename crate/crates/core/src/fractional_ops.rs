//! Caputo derivative on a uniform grid and residuals of the fractional
//! Kolmogorov-Feller equations.
//!
//! The derivative uses the L1 scheme. Marginals behave like
//! `c₀ + c₁ t^β + c₂ t^{2β} + …` near the origin, which limits plain L1 to
//! order `min(2−β, 1+β)` at a fixed time. When `1+β < 2−β` (i.e. `β < 1/2`)
//! the scheme is augmented with starting weights that make it exact on
//! `t^{jβ}` for every `jβ < 1`, which restores the `2−β` behaviour in
//! practice.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::marginals::{check_tol, distribution, poisson_pmf};
use crate::quadrature::{integrate, QuadConfig};
use crate::special_fn::{h_beta_series, mwright_tail_bound, OrderParam, SeriesEvalConfig};
use libm::tgamma as gamma;

/// Fewest points a [`TimeGrid`] may have.
pub const MIN_GRID_POINTS: usize = 16;

/// Residuals are reported on `t ≥ INTERIOR_FRACTION · t_end`; closer to the
/// origin the L1 error is dominated by the initial layer and does not
/// decrease at the asymptotic rate.
pub const INTERIOR_FRACTION: f64 = 0.25;

/// Multiplier on the Richardson error estimate.
pub const RICHARDSON_SAFETY: f64 = 1.25;

/// Floor for the tolerance used when sampling marginals, kept clear of the
/// smallest tolerance the marginal engine accepts.
pub const MIN_SAMPLE_TOL: f64 = 1e-13;

/// Marginals are sampled ten times tighter than the residual tolerance.
fn sample_tolerance(tol: f64) -> Result<f64> {
    check_tol(tol)?;
    Ok((0.1 * tol).max(MIN_SAMPLE_TOL))
}

/// Uniform grid `h, 2h, …, len·h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    h: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(h: f64, len: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::domain(format!(
                "grid step must be positive, got {h}"
            )));
        }
        if len < MIN_GRID_POINTS {
            return Err(Error::domain(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {len}"
            )));
        }
        Ok(Self { h, len })
    }

    /// `len` equal steps covering `(0, t_end]`.
    pub fn uniform(t_end: f64, len: usize) -> Result<Self> {
        Self::new(t_end / len as f64, len)
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.point(self.len - 1)
    }

    /// Same interval, half the step.
    pub fn refined(&self) -> Self {
        Self {
            h: 0.5 * self.h,
            len: 2 * self.len,
        }
    }

    /// Index of the first point with `t ≥ INTERIOR_FRACTION · t_end`.
    pub fn interior_start(&self) -> usize {
        let cut = INTERIOR_FRACTION * self.t_end();
        (0..self.len)
            .find(|&i| self.point(i) >= cut * (1.0 - 1e-12))
            .unwrap_or(0)
    }
}

/// `b_j = (j+1)^{1−β} − j^{1−β}` for `j < len`.
fn l1_weights(beta: f64, len: usize) -> Vec<f64> {
    let e = 1.0 - beta;
    (0..len)
        .map(|j| {
            let j = j as f64;
            (j + 1.0).powf(e) - j.powf(e)
        })
        .collect()
}

/// Plain L1 sums at `m = 1..=len` for samples `f_0..f_len` on a unit step.
fn l1_unit_step(values: &[f64], weights: &[f64], beta: f64) -> Vec<f64> {
    let len = values.len() - 1;
    let scale = 1.0 / gamma(2.0 - beta);
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    (1..=len)
        .map(|m| {
            let s: f64 = (0..m).map(|k| weights[m - k - 1] * diffs[k]).sum();
            s * scale
        })
        .collect()
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::domain("singular starting-weight system"));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Exponents `jβ < 1`, `j ≥ 1`, that get starting weights; empty for `β ≥ 1/2`.
pub fn starting_exponents(beta: OrderParam) -> Vec<f64> {
    let b = beta.value();
    if b >= 0.5 {
        return Vec::new();
    }
    (1..)
        .map(|j| j as f64 * b)
        .take_while(|&s| s < 1.0 - 1e-12)
        .collect()
}

/// L1 derivative of already sampled values `f(0), f(h), …, f(len·h)`, with
/// optional starting weights for the given exponents.
pub fn caputo_from_samples(
    values: &[f64],
    beta: OrderParam,
    h: f64,
    exponents: &[f64],
) -> Result<Vec<f64>> {
    let b = beta.require_fractional()?;
    if values.len() < 2 {
        return Err(Error::domain(
            "need samples at 0 and at least one grid point",
        ));
    }
    let len = values.len() - 1;
    let weights = l1_weights(b, len);
    let h_pow = h.powf(-b);
    let mut out: Vec<f64> = l1_unit_step(values, &weights, b)
        .into_iter()
        .map(|v| v * h_pow)
        .collect();

    let q = exponents.len();
    if q == 0 {
        return Ok(out);
    }
    if q > len {
        return Err(Error::domain("more starting exponents than grid points"));
    }
    // L1 applied to k ↦ k^σ on the unit grid, per exponent
    let l1_powers: Vec<Vec<f64>> = exponents
        .iter()
        .map(|&s| {
            let samples: Vec<f64> = (0..=len).map(|k| (k as f64).powf(s)).collect();
            l1_unit_step(&samples, &weights, b)
        })
        .collect();
    let matrix: Vec<Vec<f64>> = exponents
        .iter()
        .map(|&s| (1..=q).map(|j| (j as f64).powf(s)).collect())
        .collect();
    for m in 1..=len {
        let rhs: Vec<f64> = exponents
            .iter()
            .zip(&l1_powers)
            .map(|(&s, l1)| {
                gamma(s + 1.0) / gamma(s + 1.0 - b) * (m as f64).powf(s - b) - l1[m - 1]
            })
            .collect();
        let w = solve_small(matrix.clone(), rhs)?;
        let corr: f64 = w
            .iter()
            .enumerate()
            .map(|(j, wj)| wj * (values[j + 1] - values[0]))
            .sum();
        out[m - 1] += h_pow * corr;
    }
    Ok(out)
}

/// L1 discretisation of `(1/Γ(1−β)) ∫₀^t (t−s)^{−β} f′(s) ds` at every grid point.
pub fn caputo_derivative<F>(samples: F, beta: OrderParam, grid: &TimeGrid) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    beta.require_fractional()?;
    let values = sample_with_origin(&samples, grid)?;
    caputo_from_samples(&values, beta, grid.step(), &[])
}

/// As [`caputo_derivative`], with starting weights for `exponents`.
pub fn caputo_derivative_corrected<F>(
    samples: F,
    beta: OrderParam,
    grid: &TimeGrid,
    exponents: &[f64],
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    beta.require_fractional()?;
    let values = sample_with_origin(&samples, grid)?;
    caputo_from_samples(&values, beta, grid.step(), exponents)
}

fn sample_with_origin<F>(samples: &F, grid: &TimeGrid) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    std::iter::once(0.0)
        .chain(grid.points())
        .map(samples)
        .collect()
}

/// Residual of a fractional equation `D^β P = rhs` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub grid: TimeGrid,
    /// Caputo derivative of the marginal at every grid point.
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `max |lhs − rhs|` over points from `interior_start` on.
    pub max_abs_residual: f64,
    /// Richardson estimate of the L1 error on this grid, with safety margin
    /// and a floor for the sampling error of the marginals.
    pub expected_discretization_bound: f64,
    pub interior_start: usize,
}

impl ResidualReport {
    pub fn residuals(&self) -> Vec<f64> {
        self.lhs.iter().zip(&self.rhs).map(|(l, r)| l - r).collect()
    }
}

/// Marginals `P(0..=n_max, t)` at `t = 0` and every point of `grid`, computed
/// point-wise in parallel.
fn sample_marginals(
    beta: OrderParam,
    model: IntensityModel,
    n_max: u64,
    times: &[f64],
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    times
        .par_iter()
        .map(|&t| {
            distribution(t, beta, model, n_max, tol)
                .map(|reports| reports.iter().map(|r| r.value).collect())
        })
        .collect()
}

fn times_with_origin(grid: &TimeGrid) -> Vec<f64> {
    std::iter::once(0.0).chain(grid.points()).collect()
}

/// Shared lhs machinery: derivative on `grid` and on its refinement, plus
/// the Richardson bound on `grid`.
struct LhsResult {
    coarse: Vec<f64>,
    bound: f64,
}

fn lhs_with_bound(
    beta: OrderParam,
    grid: &TimeGrid,
    fine_values: &[f64],
    sample_tol: f64,
) -> Result<LhsResult> {
    let b = beta.value();
    let exps = starting_exponents(beta);
    let fine_grid = grid.refined();
    let coarse_values: Vec<f64> = fine_values.iter().step_by(2).copied().collect();
    let coarse = caputo_from_samples(&coarse_values, beta, grid.step(), &exps)?;
    let fine = caputo_from_samples(fine_values, beta, fine_grid.step(), &exps)?;
    let start = grid.interior_start();
    let p = 2.0 - b;
    let diff = (start..grid.len())
        .map(|i| (coarse[i] - fine[2 * i + 1]).abs())
        .fold(0.0, f64::max);
    // sampling errors enter through h^{−β}-sized weights
    let noise = 4.0 * sample_tol * grid.step().powf(-b) / gamma(2.0 - b);
    Ok(LhsResult {
        coarse,
        bound: RICHARDSON_SAFETY * diff / (1.0 - 2f64.powf(-p)) + noise,
    })
}

fn report(grid: TimeGrid, lhs: LhsResult, rhs: Vec<f64>) -> ResidualReport {
    let start = grid.interior_start();
    let max_abs_residual = (start..grid.len())
        .map(|i| (lhs.coarse[i] - rhs[i]).abs())
        .fold(0.0, f64::max);
    ResidualReport {
        grid,
        lhs: lhs.coarse,
        rhs,
        max_abs_residual,
        expected_discretization_bound: lhs.bound,
        interior_start: start,
    }
}

/// Residual of `D^β P(n,t) = P(n−1,t) − P(n,t)` (with `P(−1,t) = 0`) for
/// the standard fractional Poisson process. Marginals are sampled at
/// tolerance `tol/10`.
pub fn kf_residual(n: u64, beta: OrderParam, grid: &TimeGrid, tol: f64) -> Result<ResidualReport> {
    beta.require_fractional()?;
    let sample_tol = sample_tolerance(tol)?;
    let fine = grid.refined();
    let table = sample_marginals(
        beta,
        IntensityModel::unit(),
        n,
        &times_with_origin(&fine),
        sample_tol,
    )?;
    let n = n as usize;
    let p_n: Vec<f64> = table.iter().map(|row| row[n]).collect();
    let lhs = lhs_with_bound(beta, grid, &p_n, sample_tol)?;
    // coarse point i sits at fine index 2(i+1)
    let rhs = (0..grid.len())
        .map(|i| {
            let row = &table[2 * (i + 1)];
            let prev = if n == 0 { 0.0 } else { row[n - 1] };
            prev - row[n]
        })
        .collect();
    Ok(report(*grid, lhs, rhs))
}

/// Integration range of the memory integral in the non-homogeneous system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsSupport {
    /// `u ∈ (0, ∞)`, consistent with the subordination representation.
    Full,
    /// `u ∈ (0, t)`.
    UpToT,
}

/// `∫ λ(u) (p_{n−1} − p_n)(Λ(u)) h_β(t,u) du` with `p_k` the Poisson
/// probabilities and `p_{−1} = 0`.
pub fn fnhpp_rhs(
    n: u64,
    t: f64,
    beta: OrderParam,
    model: &IntensityModel,
    support: RhsSupport,
    tol: f64,
) -> Result<f64> {
    let b = beta.require_fractional()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be positive, got {t}")));
    }
    let t_beta = t.powf(b);
    let cfg = SeriesEvalConfig::for_integrand((tol * 1e-3).max(1e-17));
    let weight = |u: f64| -> f64 {
        let lam = model.cumulative(u);
        let prev = if n == 0 { 0.0 } else { poisson_pmf(n - 1, lam) };
        model.rate(u) * (prev - poisson_pmf(n, lam))
    };
    let integrand = |u: f64| -> Result<f64> {
        if u == 0.0 {
            return Ok(0.0);
        }
        let w = weight(u);
        if w == 0.0 {
            return Ok(0.0);
        }
        Ok(w * h_beta_series(beta, t, u, &cfg)?.value)
    };

    let mut upper = match support {
        RhsSupport::UpToT => t,
        RhsSupport::Full => full_support_cutoff(n, t_beta, beta, model, 0.1 * tol),
    };
    if !(upper > 0.0) {
        upper = t;
    }
    // the weight varies on the scale of Λ⁻¹(n ± √n); h_β on the scale t^β
    let mut points = vec![0.0, upper];
    for y in [
        0.5,
        1.0,
        2.0,
        n as f64,
        n as f64 + 3.0 * (n as f64 + 1.0).sqrt(),
    ] {
        if let Ok(u) = model.invert(y) {
            points.push(u);
        }
    }
    for f in [0.25, 1.0, 3.0] {
        points.push(f * t_beta);
    }
    points.retain(|&u| u >= 0.0 && u <= upper);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let q = integrate(integrand, &points, &QuadConfig::absolute(0.5 * tol))?;
    if !q.converged {
        return Err(Error::ToleranceNotMet {
            requested: tol,
            achieved: q.error,
            n_evals: q.n_evals,
        });
    }
    Ok(q.value)
}

/// Smallest scanned `U` with the omitted part of the full-support integral
/// below `tail_tol`, bounded through moments of `M_β`:
/// `∫_U^∞ λ(u) p(Λ(u)) h_β(t,u) du ≤ a r t^{β(r−1)} sup p · ∫_{U/t^β}^∞ z^{r−1} M_β(z) dz`
/// for `Λ(x) = a x^r`.
fn full_support_cutoff(
    n: u64,
    t_beta: f64,
    beta: OrderParam,
    model: &IntensityModel,
    tail_tol: f64,
) -> f64 {
    let r = model.scaling_constant();
    let ar = model.rate(1.0);
    let sup_pmf = |lam: f64| {
        [n.checked_sub(1), Some(n)]
            .into_iter()
            .flatten()
            .map(|k| {
                if lam >= k as f64 {
                    poisson_pmf(k, lam)
                } else {
                    poisson_pmf(k, k as f64)
                }
            })
            .fold(0.0, f64::max)
    };
    let mut z = 0.5;
    while z < 1e6 {
        let u = z * t_beta;
        let bound = ar
            * t_beta.powf(r - 1.0)
            * sup_pmf(model.cumulative(u))
            * mwright_tail_bound(beta, r - 1.0, z);
        if bound <= tail_tol {
            return u;
        }
        z *= 1.05;
    }
    z * t_beta
}

/// Residual of the non-homogeneous system
/// `D^β P(n,t) = ∫ λ(u)(p_{n−1} − p_n)(Λ(u)) h_β(t,u) du`.
pub fn fnhpp_residual(
    n: u64,
    beta: OrderParam,
    model: &IntensityModel,
    grid: &TimeGrid,
    tol: f64,
    support: RhsSupport,
) -> Result<ResidualReport> {
    beta.require_fractional()?;
    let sample_tol = sample_tolerance(tol)?;
    let fine = grid.refined();
    let table = sample_marginals(beta, *model, n, &times_with_origin(&fine), sample_tol)?;
    let p_n: Vec<f64> = table.iter().map(|row| row[n as usize]).collect();
    let lhs = lhs_with_bound(beta, grid, &p_n, sample_tol)?;
    let rhs = grid
        .points()
        .par_iter()
        .map(|&t| fnhpp_rhs(n, t, beta, model, support, sample_tol))
        .collect::<Result<Vec<f64>>>()?;
    Ok(report(*grid, lhs, rhs))
}
