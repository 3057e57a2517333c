//! Large-count marginals against a brute-force integration over a fixed fine
//! partition around the peak, independent of the adaptive engine's choices
//! of cutoff and seeding.

use fracpoisson::marginals::{marginal, marginal_subordination, poisson_pmf};
use fracpoisson::quadrature::{integrate, QuadConfig};
use fracpoisson::special_fn::mwright;
use fracpoisson::{IntensityModel, MarginalQuery, OrderParam, SeriesEvalConfig};

fn brute_force(n: u64, t: f64, b: f64, model: IntensityModel, lo: f64, hi: f64) -> f64 {
    let beta = OrderParam::new(b).unwrap();
    let cfg = SeriesEvalConfig::default();
    let tb = t.powf(b);
    let pieces = 400;
    let breaks: Vec<f64> = (0..=pieces)
        .map(|i| lo + (hi - lo) * i as f64 / pieces as f64)
        .collect();
    integrate(
        |z| Ok(poisson_pmf(n, model.cumulative(z * tb)) * mwright(beta, z, &cfg)?),
        &breaks,
        &QuadConfig::absolute(1e-16),
    )
    .unwrap()
    .value
}

#[test]
fn large_count_marginals_match_brute_force() {
    let cases = [
        (1024u64, 0.5, IntensityModel::unit(), 1.0),
        (1024, 0.5, IntensityModel::unit(), 2.0),
        (256, 0.3, IntensityModel::unit(), 0.7),
        (512, 0.7, IntensityModel::power_law(2.0, 1.0).unwrap(), 1.5),
    ];
    for (n, b, model, z0) in cases {
        let beta = OrderParam::new(b).unwrap();
        // place the Poisson peak at z0
        let t = (model.invert(n as f64).unwrap() / z0).powf(1.0 / b);
        let got = marginal(&MarginalQuery::new(n, t, beta, model).unwrap(), 1e-12).unwrap();
        // the pmf is below e^{-n/10} outside ±60% of the peak
        let want = brute_force(n, t, b, model, 0.4 * z0, 1.6 * z0);
        assert!(
            (got.value - want).abs() <= 1e-11,
            "n={n} b={b} {model}: {} vs {want}",
            got.value
        );
    }
}

#[test]
fn subordination_form_agrees_with_direct_form() {
    let beta = OrderParam::new(0.6).unwrap();
    for (n, t) in [(0u64, 0.3), (3, 1.0), (40, 50.0), (300, 2e4)] {
        let direct = marginal(
            &MarginalQuery::new(n, t, beta, IntensityModel::unit()).unwrap(),
            1e-11,
        )
        .unwrap();
        let sub = marginal_subordination(n, t, beta, 1e-11).unwrap();
        assert!((direct.value - sub.value).abs() <= 2e-11, "n={n} t={t}");
    }
}
