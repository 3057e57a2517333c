//! Globally adaptive 21-point Gauss–Kronrod quadrature with bisection.
//!
//! The integrand may be vector valued: every node fills a slice of `dim`
//! values and all components share the same panels. Only the first `tracked`
//! components take part in the error control; the remaining ones are carried
//! along at no extra cost, which is handy for integrating error densities next
//! to the quantity of interest.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

/// Kronrod abscissae on [-1, 1], descending; odd indices are the Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_245_815_039,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const NODES_PER_PANEL: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl QuadConfig {
    pub fn absolute(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            max_evals: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadOutput {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub n_evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarQuad {
    pub value: f64,
    pub error: f64,
    pub n_evals: usize,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    priority: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

/// QUADPACK's error rescaling for a single component.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        e = res_asc * (200.0 * e / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

struct Evaluator<F> {
    f: F,
    dim: usize,
    tracked: usize,
    buf: Vec<f64>,
    n_evals: usize,
}

impl<F> Evaluator<F>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    fn panel(&mut self, a: f64, b: f64) -> Result<Panel> {
        let dim = self.dim;
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        // node k: 0..10 at center - half*XGK[k], 11..20 at center + half*XGK[k]
        for k in 0..NODES_PER_PANEL {
            let x = if k < 11 {
                center - half * XGK[k]
            } else {
                center + half * XGK[k - 11]
            };
            let slot = &mut self.buf[k * dim..(k + 1) * dim];
            slot.fill(0.0);
            (self.f)(x, slot)?;
        }
        self.n_evals += NODES_PER_PANEL;

        let mut values = vec![0.0; dim];
        let mut errors = vec![0.0; dim];
        let mut priority: f64 = 0.0;
        for i in 0..dim {
            let fv = |k: usize| self.buf[k * dim + i];
            let fc = fv(10);
            let mut res_k = WGK[10] * fc;
            let mut res_g = 0.0;
            let mut res_abs = WGK[10] * fc.abs();
            for k in 0..10 {
                let (l, r) = (fv(k), fv(k + 11));
                res_k += WGK[k] * (l + r);
                res_abs += WGK[k] * (l.abs() + r.abs());
                if k % 2 == 1 {
                    res_g += WG[k / 2] * (l + r);
                }
            }
            let mean = 0.5 * res_k;
            let mut res_asc = WGK[10] * (fc - mean).abs();
            for (k, w) in WGK.iter().enumerate().take(10) {
                res_asc += w * ((fv(k) - mean).abs() + (fv(k + 11) - mean).abs());
            }
            let h = half.abs();
            let err = rescale_error((res_k - res_g) * half, res_abs * h, res_asc * h);
            values[i] = res_k * half;
            errors[i] = err;
            if i < self.tracked {
                priority = priority.max(err);
            }
        }
        Ok(Panel {
            a,
            b,
            values,
            errors,
            priority,
        })
    }
}

/// Integrates a vector-valued function over `[breakpoints[0], breakpoints[last]]`,
/// starting from the panels delimited by `breakpoints` (ascending).
pub fn integrate_vec<F>(
    f: F,
    dim: usize,
    tracked: usize,
    breakpoints: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadOutput>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    if dim == 0 || tracked > dim {
        return Err(Error::domain("quadrature dimension mismatch"));
    }
    if breakpoints.len() < 2 || breakpoints.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain(
            "quadrature needs at least two finite breakpoints",
        ));
    }
    if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(
            "quadrature breakpoints must be strictly increasing",
        ));
    }
    let mut ev = Evaluator {
        f,
        dim,
        tracked,
        buf: vec![0.0; NODES_PER_PANEL * dim],
        n_evals: 0,
    };

    let mut heap = BinaryHeap::new();
    let mut finished: Vec<Panel> = Vec::new();
    let mut total_val = vec![0.0; dim];
    let mut total_err = vec![0.0; dim];
    for w in breakpoints.windows(2) {
        let p = ev.panel(w[0], w[1])?;
        for i in 0..dim {
            total_val[i] += p.values[i];
            total_err[i] += p.errors[i];
        }
        heap.push(p);
    }

    let within_tol = |val: &[f64], err: &[f64]| {
        (0..tracked).all(|i| err[i] <= cfg.abs_tol.max(cfg.rel_tol * val[i].abs()))
    };

    let mut converged = within_tol(&total_val, &total_err);
    while !converged && ev.n_evals < cfg.max_evals {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || worst.b - worst.a < 1e-14 * mid.abs().max(1e-300) {
            // cannot be split further in floating point
            finished.push(worst);
            continue;
        }
        let left = ev.panel(worst.a, mid)?;
        let right = ev.panel(mid, worst.b)?;
        for i in 0..dim {
            total_val[i] += left.values[i] + right.values[i] - worst.values[i];
            total_err[i] += left.errors[i] + right.errors[i] - worst.errors[i];
        }
        heap.push(left);
        heap.push(right);
        converged = within_tol(&total_val, &total_err);
    }

    // re-accumulate to remove drift from the running updates
    let panels: Vec<&Panel> = heap.iter().chain(finished.iter()).collect();
    let values: Vec<f64> = (0..dim)
        .map(|i| {
            panels
                .iter()
                .map(|p| p.values[i])
                .collect::<CompensatedSum>()
                .value()
        })
        .collect();
    let errors: Vec<f64> = (0..dim)
        .map(|i| panels.iter().map(|p| p.errors[i]).sum())
        .collect();
    let converged = within_tol(&values, &errors);
    Ok(QuadOutput {
        values,
        errors,
        n_evals: ev.n_evals,
        converged,
    })
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(mut f: F, breakpoints: &[f64], cfg: &QuadConfig) -> Result<ScalarQuad>
where
    F: FnMut(f64) -> Result<f64>,
{
    let out = integrate_vec(
        |x, out: &mut [f64]| {
            out[0] = f(x)?;
            Ok(())
        },
        1,
        1,
        breakpoints,
        cfg,
    )?;
    Ok(ScalarQuad {
        value: out.values[0],
        error: out.errors[0],
        n_evals: out.n_evals,
        converged: out.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_rule_exact_for_degree_31() {
        let mut ev = Evaluator {
            f: |x: f64, out: &mut [f64]| {
                out[0] = x.powi(30);
                out[1] = x.powi(18);
                Ok(())
            },
            dim: 2,
            tracked: 2,
            buf: vec![0.0; NODES_PER_PANEL * 2],
            n_evals: 0,
        };
        let p = ev.panel(0.0, 1.0).unwrap();
        assert!((p.values[0] - 1.0 / 31.0).abs() < 1e-15);
        assert!((p.values[1] - 1.0 / 19.0).abs() < 1e-15);
        // Gauss part is exact for degree 19, so the estimate for x^18 is at roundoff
        assert!(p.errors[1] < 1e-13);
    }

    #[test]
    fn adaptive_gaussian_peak() {
        let cfg = QuadConfig::absolute(1e-12);
        let s = 0.01;
        let r = integrate(
            |x| Ok((-(x - 0.3) * (x - 0.3) / (2.0 * s * s)).exp()),
            &[0.0, 1.0],
            &cfg,
        )
        .unwrap();
        let exact = s * (2.0 * std::f64::consts::PI).sqrt();
        assert!(r.converged);
        assert!((r.value - exact).abs() < 1e-12, "{} vs {}", r.value, exact);
        assert!(r.error <= 1e-12);
    }

    #[test]
    fn vector_components_share_panels() {
        let cfg = QuadConfig::absolute(1e-13);
        let out = integrate_vec(
            |x, o: &mut [f64]| {
                o[0] = x.exp();
                o[1] = x.sin();
                o[2] = 1.0 / (1.0 + x * x);
                Ok(())
            },
            3,
            3,
            &[0.0, 1.0, 3.0],
            &cfg,
        )
        .unwrap();
        assert!((out.values[0] - (3f64.exp() - 1.0)).abs() < 1e-12);
        assert!((out.values[1] - (1.0 - 3f64.cos())).abs() < 1e-13);
        assert!((out.values[2] - 3f64.atan()).abs() < 1e-13);
    }

    #[test]
    fn untracked_components_do_not_drive_refinement() {
        let cfg = QuadConfig::absolute(1e-10);
        let out = integrate_vec(
            |x, o: &mut [f64]| {
                o[0] = x;
                o[1] = (1000.0 * x).sin();
                Ok(())
            },
            2,
            1,
            &[0.0, 1.0],
            &cfg,
        )
        .unwrap();
        assert_eq!(out.n_evals, NODES_PER_PANEL);
        assert!(out.converged);
    }

    #[test]
    fn evaluation_budget_reports_nonconvergence() {
        let cfg = QuadConfig {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_evals: 100,
        };
        let r = integrate(|x| Ok((1.0 / (x + 1e-6)).sin()), &[0.0, 1.0], &cfg).unwrap();
        assert!(!r.converged);
        assert!(r.n_evals <= 100 + 2 * NODES_PER_PANEL);
    }

    #[test]
    fn integrand_errors_propagate() {
        let cfg = QuadConfig::absolute(1e-10);
        let r = integrate(|_| Err(Error::domain("boom")), &[0.0, 1.0], &cfg);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_breakpoints() {
        let cfg = QuadConfig::absolute(1e-10);
        assert!(integrate(Ok, &[0.0], &cfg).is_err());
        assert!(integrate(Ok, &[1.0, 0.0], &cfg).is_err());
        assert!(integrate(Ok, &[0.0, f64::INFINITY], &cfg).is_err());
    }
}
