use attractor_forge::attractor::{
    absorbing_radius_r2, pullback_run, verify_exponential_bound, verify_polynomial_bound,
};
use attractor_forge::drift::{DriftFamily, DriftSpec};
use attractor_forge::field_space::{norm_h, Field, SineSeriesSampler, SpatialGrid};
use attractor_forge::flow::{solve_transformed, SolverConfig};
use attractor_forge::noise::{gen_path, ModeWeights, NoiseSpec};
use attractor_forge::rng::stream;

#[test]
fn scalar_quartic_bundle_obeys_comparison_bound() {
    let g = SpatialGrid::unit(2).unwrap();
    let drift = DriftSpec::new(DriftFamily::Pointwise { p: 4.0, eta: 0.0 }, &g).unwrap();
    let triple = drift.natural_triple();
    let noise = gen_path(&NoiseSpec::zero(g), -100.0, 0.0, 0.01, 0).unwrap();
    let bundle: Vec<Field> = [-2.0, -1.0, 0.5, 1.0, 3.0].iter().map(|c| Field::constant(g, *c).unwrap()).collect();
    let cfg = SolverConfig::with_dt(0.01).unwrap();
    let res = pullback_run(&drift, &triple, &noise, &bundle, &[-1.0, -10.0, -100.0], 0.0, &cfg).unwrap();
    for (i, s) in res.s_list.iter().enumerate() {
        for d in &res.dist_sq[i] {
            assert!(*d <= 2.0 / s.abs() * 1.0001, "s {s}: {d}");
        }
    }
    assert_eq!(res.bound_violations, 0);
    assert!(res.monotone);
}

#[test]
fn polynomial_ratio_tends_to_one() {
    let g = SpatialGrid::unit(2).unwrap();
    let drift = DriftSpec::new(DriftFamily::Pointwise { p: 4.0, eta: 0.0 }, &g).unwrap();
    let triple = drift.natural_triple();
    let noise = gen_path(&NoiseSpec::zero(g), 0.0, 200.0, 0.01, 0).unwrap();
    let cfg = SolverConfig::with_dt(0.01).unwrap();
    let (x, y) = (Field::constant(g, 1.0).unwrap(), Field::constant(g, -1.0).unwrap());
    let rep = verify_polynomial_bound(&drift, &triple, &noise, &x, &y, 0.0, 0.0, &[1.0, 10.0, 200.0], &cfg).unwrap();
    let last = *rep.ratios.last().unwrap();
    assert!(rep.max_ratio <= 1.0 + 1e-6);
    assert!(last > 0.95 && last <= 1.0 + 1e-6, "ratio {last}");
}

#[test]
fn heat_contraction_rate() {
    let g = SpatialGrid::unit(32).unwrap();
    let drift = DriftSpec::new(DriftFamily::Rde { p: 2.0, eta: 0.0 }, &g).unwrap();
    let triple = drift.natural_triple();
    let noise = gen_path(&NoiseSpec::qwiener(ModeWeights::default_law(), g), -1.0, 1.0, 1e-3, 3).unwrap();
    let cfg = SolverConfig::with_dt(1e-3).unwrap();
    let x = g.sine_mode(1);
    let y = Field::zeros(g);
    let times: Vec<f64> = (1..=10).map(|k| k as f64 * 0.05).collect();
    let rep = verify_exponential_bound(&drift, &triple, &noise, &x, &y, 1.0, 0.0, 0.0, &times, &cfg).unwrap();
    // Discrete operator Δ_h − I: the difference decays like e^{−2(μ₁+1)t}.
    let expect = 2.0 * (g.principal_eigenvalue() + 1.0);
    let got = rep.lambda_hat.unwrap();
    assert!((got / expect - 1.0).abs() < 0.02, "{got} vs {expect}");
    assert_eq!(rep.bound_violations, 0);
}

#[test]
fn linear_scalar_distance_is_exponential() {
    let g = SpatialGrid::unit(2).unwrap();
    let drift = DriftSpec::new(DriftFamily::Pointwise { p: 2.0, eta: 0.0 }, &g).unwrap();
    let triple = drift.natural_triple();
    let noise = gen_path(&NoiseSpec::zero(g), 0.0, 2.0, 1e-4, 0).unwrap();
    let cfg = SolverConfig::with_dt(1e-4).unwrap();
    let a = solve_transformed(&drift, &triple, &noise, &Field::constant(g, 1.0).unwrap(), 0.0, 2.0, &cfg).unwrap();
    let b = solve_transformed(&drift, &triple, &noise, &Field::constant(g, 0.0).unwrap(), 0.0, 2.0, &cfg).unwrap();
    let d0 = norm_h(&a.states()[0].axpy(-1.0, &b.states()[0]).unwrap(), &triple).unwrap().powi(2);
    for ((t, u), v) in a.times().iter().zip(a.states()).zip(b.states()).step_by(1000) {
        let d = norm_h(&u.axpy(-1.0, v).unwrap(), &triple).unwrap().powi(2);
        let expect = d0 * (-2.0 * t).exp();
        assert!((d / expect - 1.0).abs() < 2e-3 * (1.0 + t), "t {t}: {d} vs {expect}");
    }
}

#[test]
fn r2_is_finite_and_bounded_by_samples() {
    let g = SpatialGrid::unit(24).unwrap();
    let drift = DriftSpec::new(DriftFamily::Rde { p: 2.0, eta: 0.0 }, &g).unwrap();
    let triple = drift.natural_triple();
    let noise = gen_path(&NoiseSpec::qwiener(ModeWeights::default_law(), g), -10.0, 0.0, 0.01, 8).unwrap();
    let cfg = SolverConfig::with_dt(0.01).unwrap();
    let sampler = SineSeriesSampler::certification();
    let xs: Vec<Field> = (0..4).map(|i| sampler.sample(&g, &mut stream(5, i))).collect();
    let diag = absorbing_radius_r2(&drift, &triple, &noise, &xs, &[-2.0, -5.0, -10.0], &cfg).unwrap();
    assert!(diag.estimate.value.is_finite() && diag.estimate.value > 0.0);
    let max_s = diag.per_s.iter().map(|p| p.1).fold(0.0, f64::max);
    assert!((diag.estimate.value - max_s).abs() <= 1e-12 * max_s.max(1.0));
    assert!(absorbing_radius_r2(&drift, &triple, &noise, &xs, &[-1.0], &cfg).is_err());
}
