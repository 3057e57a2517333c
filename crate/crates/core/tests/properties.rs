use std::f64::consts::PI;

use libm::tgamma;
use proptest::prelude::*;

use fracpoisson::cli::format_real;
use fracpoisson::fractional_ops::{caputo_from_samples, starting_exponents};
use fracpoisson::marginals::{marginal, poisson_pmf};
use fracpoisson::special_fn::{h_beta, mwright_series};
use fracpoisson::{IntensityModel, MarginalQuery, OrderParam, SeriesEvalConfig};

fn beta(b: f64) -> OrderParam {
    OrderParam::new(b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn caputo_is_linear(
        b in 0.1f64..0.9,
        a in -3.0f64..3.0,
        c in -3.0f64..3.0,
        f in prop::collection::vec(-1.0f64..1.0, 17..40),
        g_seed in -1.0f64..1.0,
    ) {
        let h = 0.05;
        let bp = beta(b);
        let g: Vec<f64> = f.iter().enumerate().map(|(i, _)| (g_seed * i as f64).sin()).collect();
        let mix: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + c * y).collect();
        let ex = starting_exponents(bp);
        let df = caputo_from_samples(&f, bp, h, &ex).unwrap();
        let dg = caputo_from_samples(&g, bp, h, &ex).unwrap();
        let dm = caputo_from_samples(&mix, bp, h, &ex).unwrap();
        let scale = df.iter().chain(&dg).fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..dm.len() {
            prop_assert!((dm[i] - (a * df[i] + c * dg[i])).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn caputo_is_exact_on_affine_functions(b in 0.5f64..0.95, slope in -2.0f64..2.0, offset in -2.0f64..2.0) {
        let h = 1.0 / 32.0;
        let values: Vec<f64> = (0..=64).map(|i| offset + slope * i as f64 * h).collect();
        let d = caputo_from_samples(&values, beta(b), h, &[]).unwrap();
        for (i, v) in d.iter().enumerate() {
            let t = (i + 1) as f64 * h;
            let exact = slope * t.powf(1.0 - b) / tgamma(2.0 - b);
            prop_assert!((v - exact).abs() <= 1e-12 * (1.0 + exact.abs()), "{} vs {}", v, exact);
        }
    }

    #[test]
    fn cumulative_intensity_round_trips(r in 0.2f64..4.0, scale in 0.1f64..10.0, x in 1e-3f64..1e3) {
        for m in [IntensityModel::power_law(r, scale).unwrap(), IntensityModel::linear(scale).unwrap()] {
            let back = m.invert(m.cumulative(x)).unwrap();
            prop_assert!((back - x).abs() <= 1e-12 * x);
            let y = m.cumulative(x);
            prop_assert!((m.rate(x) * x / y - m.scaling_constant()).abs() <= 1e-12);
        }
    }

    #[test]
    fn marginals_are_probabilities(b in 0.2f64..0.9, n in 0u64..30, t in 0.01f64..20.0) {
        let q = MarginalQuery::new(n, t, beta(b), IntensityModel::unit()).unwrap();
        let r = marginal(&q, 1e-9).unwrap();
        prop_assert!(r.value >= -r.abs_err_est && r.value <= 1.0 + r.abs_err_est);
        prop_assert!(r.abs_err_est <= 1e-9);
    }

    #[test]
    fn half_order_mwright_matches_gaussian(z in 0.0f64..6.0) {
        let cfg = SeriesEvalConfig::default();
        let sv = mwright_series(beta(0.5), z, &cfg).unwrap();
        let exact = (-z * z / 4.0).exp() / PI.sqrt();
        prop_assert!((sv.value - exact).abs() <= 10.0 * 1e-12);
    }

    #[test]
    fn subordination_density_rescales_to_mwright(b in 0.2f64..0.9, t in 0.1f64..10.0, z in 0.0f64..4.0) {
        let cfg = SeriesEvalConfig::default();
        let bp = beta(b);
        let tb = t.powf(b);
        let lhs = tb * h_beta(bp, t, z * tb, &cfg).unwrap();
        let rhs = mwright_series(bp, z, &cfg).unwrap().value;
        prop_assert!((lhs - rhs).abs() <= 1e-10, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn poisson_pmf_matches_recursion(lambda in 0.01f64..200.0, n in 0u64..400) {
        let p = poisson_pmf(n + 1, lambda);
        let q = poisson_pmf(n, lambda) * lambda / (n + 1) as f64;
        prop_assert!((p - q).abs() <= 1e-12 * p.max(q) + f64::MIN_POSITIVE);
    }

    #[test]
    fn printed_reals_keep_fifteen_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = format_real(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-15 * x.abs());
    }
}
