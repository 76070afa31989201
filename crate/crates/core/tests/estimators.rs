mod common;

use common::{linspace, oracle_put_price, oracle_stock_price, table};
use lambert_indiff::decomposition::{
    call_decomposition, call_residual_quadrature, call_thresholds, decompose_laplace,
    put_decomposition, put_residual_quadrature, stock_decomposition, TangentChoice,
};
use lambert_indiff::hedging::{strategy_value, StrategyConfig, StrategyKind};
use lambert_indiff::decomposition::stock_residual_quadrature;
use lambert_indiff::market::derived;
use lambert_indiff::mc::sample_normals;
use lambert_indiff::pricing::price_direct;
use lambert_indiff::{McConfig, PayoffSpec, Preset};

const RHOS: [f64; 5] = [-0.8, -0.4, 0.0, 0.4, 0.8];

#[test]
fn laplace_of_identity_against_simpson() {
    let (eta, t) = (0.3, 0.25);
    let tangent = TangentChoice::unbounded(0.0, 1.0).unwrap();
    let dec = decompose_laplace(|x| x, &tangent, 1.0, eta, t, &McConfig::new(10_000, 5)).unwrap();
    let vol = eta * t.sqrt();
    let n = 100_000;
    let h = 24.0 / n as f64;
    let f = |z: f64| (-0.5 * z * z).exp() * (-(vol * z).exp()).exp();
    let sum: f64 = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(-12.0 + i as f64 * h)
        })
        .sum();
    let oracle = sum * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt();
    assert!((dec.product().mean - oracle).abs() < 1e-3, "{} vs {oracle}", dec.product().mean);
}

#[test]
fn exact_tangent_against_direct_laplace() {
    let (eta, t, theta, u, v) = (0.4, 0.5, 3.0, 0.5, 2.0);
    let mc = McConfig::new(10_000, 9);
    let tangent = TangentChoice::unbounded(u, v).unwrap();
    let dec = decompose_laplace(|x| u + v * x, &tangent, theta, eta, t, &mc).unwrap();
    let vol = eta * t.sqrt();
    let draws: Vec<f64> = sample_normals(&mc)
        .unwrap()
        .into_iter()
        .map(|z| (-theta * (u + v * (vol * z).exp())).exp())
        .collect();
    let direct = lambert_indiff::mc::mean_estimate(&draws).unwrap();
    let p = dec.product();
    let comb = (p.variance() + direct.variance()).sqrt();
    assert!((p.mean - direct.mean).abs() <= 4.0 * comb);
}

#[test]
fn lambert_variance_never_exceeds_direct() {
    let (m, a) = table(Preset::Table1, 0.5);
    let mc = McConfig::new(10_000, 3);
    for rho in linspace(-0.8, 0.8, 9) {
        let lam = stock_decomposition(&m, &a, rho, &mc).unwrap();
        let dir = price_direct(&m, &a, rho, &PayoffSpec::LongStock, &mc).unwrap();
        assert!(lam.price.variance() <= dir.variance(), "ρ={rho}");
    }
}

#[test]
fn direct_and_lambert_agree_where_direct_is_reliable() {
    // Small θŝ0 keeps the direct estimator free of rare-event bias.
    let mc = McConfig::new(10_000, 17);
    for gamma in [0.05, 0.1, 0.2] {
        let (m, a) = table(Preset::Table2, gamma);
        for rho in RHOS {
            let lam = stock_decomposition(&m, &a, rho, &mc).unwrap().price;
            let dir = price_direct(&m, &a, rho, &PayoffSpec::LongStock, &mc).unwrap();
            let comb = (lam.variance() + dir.variance()).sqrt();
            assert!((lam.mean - dir.mean).abs() <= 4.0 * comb, "γ={gamma} ρ={rho}");
            let oracle = oracle_stock_price(&m, &a, rho);
            assert!((lam.mean - oracle).abs() <= 4.0 * lam.std_error);
        }
    }
}

#[test]
fn lambert_estimator_tracks_quadrature_everywhere() {
    let mc = McConfig::new(10_000, 23);
    for gamma in [0.5, 4.0, 15.0] {
        let (m, a) = table(Preset::Table1, gamma);
        for rho in RHOS {
            let lam = stock_decomposition(&m, &a, rho, &mc).unwrap();
            assert!(lam.residual.mean >= -3.0 * lam.residual.std_error);
            let oracle = oracle_stock_price(&m, &a, rho);
            assert!((lam.price.mean - oracle).abs() <= 4.0 * lam.price.std_error);
        }
    }
}

#[test]
fn put_estimates_and_variance() {
    let (m, a) = table(Preset::Table1, 0.5);
    let mc = McConfig::new(10_000, 4);
    let strike = 110.0;
    let payoff = PayoffSpec::ShortPut { strike };
    for rho in RHOS {
        let lam = put_decomposition(&m, &a, rho, strike, &mc).unwrap();
        // The direct estimate is biased by rare large weights here; only its
        // spread is compared.
        let dir = price_direct(&m, &a, rho, &payoff, &mc).unwrap();
        let quad = lam.deterministic + put_residual_quadrature(&m, &a, rho, strike).unwrap();
        // put_decomposition prices the short position as p^put = -p_h.
        assert!((lam.price.mean - quad).abs() <= 4.0 * lam.price.std_error, "ρ={rho}");
        let oracle = oracle_put_price(&m, &a, rho, strike);
        assert!((quad / oracle - 1.0).abs() < 1e-8, "ρ={rho}: {quad} vs {oracle}");
        assert!(lam.price.variance() < dir.variance());
    }
}

#[test]
fn put_deterministic_part_recomputed() {
    let (m, a) = table(Preset::Table1, 0.5);
    let (rho, strike) = (0.3, 120.0);
    let dq = derived(&m, &a, rho).unwrap();
    let s = m.eta * m.eta * m.maturity;
    let c = (-m.r * m.maturity).exp() / (a.gamma * (1.0 - rho * rho));
    let expect = a.lambda * (-m.r * m.maturity).exp() * strike
        - c * (dq.w_bar / s + dq.w_bar * dq.w_bar / (2.0 * s));
    let got = put_decomposition(&m, &a, rho, strike, &McConfig::new(100, 1)).unwrap();
    assert!((got.deterministic - expect).abs() < 1e-10 * expect.abs());
}

#[test]
fn deep_in_the_money_call_beats_direct() {
    let (m, a) = table(Preset::Table1, 0.5);
    let mc = McConfig::new(10_000, 8);
    let th = call_thresholds(&m, &a, 0.8).unwrap();
    let strike = 0.1 * th.k_low;
    let dec = call_decomposition(&m, &a, 0.8, strike, &mc).unwrap();
    let direct = dec.direct.unwrap();
    assert!(dec.price.std_error < direct.std_error);
    let quad = dec.deterministic + call_residual_quadrature(&m, &a, 0.8, strike).unwrap();
    assert!((dec.price.mean - quad).abs() <= 4.0 * dec.price.std_error);
}

#[test]
fn deep_out_of_the_money_call_is_consistent() {
    let (m, a) = table(Preset::Table1, 0.5);
    let mc = McConfig::new(10_000, 8);
    let th = call_thresholds(&m, &a, 0.8).unwrap();
    let strike = 10.0 * th.k_high;
    let dec = call_decomposition(&m, &a, 0.8, strike, &mc).unwrap();
    let quad = dec.deterministic + call_residual_quadrature(&m, &a, 0.8, strike).unwrap();
    assert!(dec.price.mean.is_finite());
    assert!(quad.abs() < 1e-6);
    assert!((dec.price.mean - quad).abs() <= 4.0 * dec.price.std_error + 1e-9);
}

#[test]
fn finite_difference_strategy_adds_the_residual_sensitivity() {
    let (m, a) = table(Preset::Table2, 0.1);
    let (rho, s) = (0.6, 1.0);
    let mut fd = StrategyConfig::new(StrategyKind::FdOptimal);
    fd.inner_mc = McConfig::new(10_000, 12);
    let det = StrategyConfig::new(StrategyKind::Deterministic);
    let v_fd = strategy_value(&fd, &m, &a, rho, 0.0, s).unwrap();
    let v_det = strategy_value(&det, &m, &a, rho, 0.0, s).unwrap();
    let h = 1e-3 * s;
    let a_at = |x: f64| stock_residual_quadrature(&m.from_time(0.0, x).unwrap(), &a, rho).unwrap();
    let da_ds = (a_at(s + h) - a_at(s - h)) / (2.0 * h);
    let expect = -(m.eta * rho / m.sigma) * s * da_ds;
    let gap = v_fd.value - v_det.value;
    assert!((gap - expect).abs() <= 4.0 * v_fd.std_error, "{gap} vs {expect} ± {}", v_fd.std_error);
}
