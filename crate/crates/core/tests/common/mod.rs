//! Shared oracles for the integration tests.
#![allow(dead_code)]

use lambert_indiff::{AgentParams, MarketScenario, Preset};

pub fn agent(gamma: f64, lambda: f64) -> AgentParams {
    AgentParams {
        gamma,
        lambda,
        x0: 0.0,
    }
}

pub fn table(preset: Preset, gamma: f64) -> (MarketScenario, AgentParams) {
    (preset.scenario(), agent(gamma, preset.default_lambda()))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `ln E exp(-a·e^{vN})` by composite Simpson in log space around the mode
/// of the integrand, located by Newton on its concave log.
pub fn log_laplace_lognormal(a: f64, v: f64) -> f64 {
    let mut z = 0.0;
    for _ in 0..200 {
        let e = a * v * (v * z).exp();
        let step = (-z - e) / (-1.0 - v * e);
        z -= step;
        if step.abs() < 1e-14 {
            break;
        }
    }
    log_gaussian_expectation(|z| -a * (v * z).exp(), z - 14.0, z + 14.0)
}

/// `ln E exp(f(N))` by composite Simpson in log space on `[lo, hi]`.
pub fn log_gaussian_expectation<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let g = |z: f64| -0.5 * z * z + f(z);
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let terms: Vec<f64> = (0..=n)
        .map(|i| {
            let w: f64 = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w.ln() + g(lo + i as f64 * h)
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    m + sum.ln() + (h / 3.0).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Long-stock reservation price evaluated from its defining expectation.
pub fn oracle_stock_price(m: &MarketScenario, a: &AgentParams, rho: f64) -> f64 {
    let q = (1.0 - rho) * (1.0 + rho);
    let sh = (m.mu - m.r) / m.sigma;
    let delta = m.nu - rho * m.eta * sh;
    let s_hat0 = m.s0 * ((delta - 0.5 * m.eta * m.eta) * m.maturity).exp();
    let theta = a.lambda * a.gamma * q;
    let scale = (-m.r * m.maturity).exp() / (a.gamma * q);
    -scale * log_laplace_lognormal(theta * s_hat0, m.eta * m.maturity.sqrt())
}

/// Selling price of `λ` puts, `e^{-rT}/(γ(1-ρ²))·ln E exp(θ(K - X)₊)`.
pub fn oracle_put_price(m: &MarketScenario, a: &AgentParams, rho: f64, strike: f64) -> f64 {
    let q = (1.0 - rho) * (1.0 + rho);
    let sh = (m.mu - m.r) / m.sigma;
    let delta = m.nu - rho * m.eta * sh;
    let s_hat0 = m.s0 * ((delta - 0.5 * m.eta * m.eta) * m.maturity).exp();
    let theta = a.lambda * a.gamma * q;
    let vol = m.eta * m.maturity.sqrt();
    let scale = (-m.r * m.maturity).exp() / (a.gamma * q);
    let f = |z: f64| theta * (strike - s_hat0 * (vol * z).exp()).max(0.0);
    // The integrand's mass can sit far left of zero; cover it generously.
    scale * log_gaussian_expectation(f, -40.0, 14.0)
}
