//! Expansion of the long-stock price in powers of `1 - ρ`.
//!
//! Coefficients up to order four are polynomials in the cumulants of the
//! lognormal `e^{η√T N}`. The default form uses cumulants normalised by
//! `χ₁^k` and `α⁴/24` as the leading order-four term; [`CoefficientForm::Printed`]
//! keeps raw cumulants and a `γ⁴` leading term for comparison.

use crate::error::{ensure_positive, IndiffError, Result};
use crate::market::{AgentParams, MarketScenario};

/// Cumulants `χ₁..χ₅` of `e^{η√T N}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantSet {
    pub chi: [f64; 5],
}

impl CumulantSet {
    /// `χ_k / χ₁^k`, the cumulants of `e^{η√T N - η²T/2}`.
    pub fn normalized(&self) -> [f64; 5] {
        let c1 = self.chi[0];
        let mut out = [0.0; 5];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.chi[k] / c1.powi(k as i32 + 1);
        }
        out
    }
}

pub fn lognormal_cumulants(eta: f64, maturity: f64) -> Result<CumulantSet> {
    ensure_positive("eta", eta)?;
    ensure_positive("T", maturity)?;
    let s = eta * eta * maturity;
    let a = s.exp_m1();
    let h = (0.5 * s).exp();
    let a2 = a * a;
    let chi = [
        h,
        h.powi(2) * a,
        h.powi(3) * a2 * (3.0 + a),
        h.powi(4) * a2 * a * (16.0 + a * (15.0 + a * (6.0 + a))),
        h.powi(5)
            * a2
            * a2
            * (125.0 + a * (222.0 + a * (205.0 + a * (120.0 + a * (45.0 + a * (10.0 + a)))))),
    ];
    Ok(CumulantSet { chi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientForm {
    #[default]
    Corrected,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorCoefficients {
    pub c: [f64; 5],
    /// `λe^{-rT}s0·e^{(ν - η(μ-r)/σ)T}`.
    pub p_hat: f64,
    /// `η(μ-r)T/σ`.
    pub alpha: f64,
}

pub fn taylor_coefficients(
    scenario: &MarketScenario,
    agent: &AgentParams,
    form: CoefficientForm,
) -> Result<TaylorCoefficients> {
    scenario.validate()?;
    agent.validate()?;
    let m = scenario;
    let cumulants = lognormal_cumulants(m.eta, m.maturity)?;
    let k = match form {
        CoefficientForm::Corrected => cumulants.normalized(),
        CoefficientForm::Printed => cumulants.chi,
    };
    let p = agent.lambda * m.discount() * m.s0 * ((m.nu - m.eta * m.sharpe()) * m.maturity).exp();
    let alpha = m.eta * m.sharpe() * m.maturity;
    let g = agent.gamma;
    let growth = (m.r * m.maturity).exp();
    let (a, a2, a3) = (alpha, alpha * alpha, alpha * alpha * alpha);
    // Powers p^j γ^{j-1} e^{(j-1)rT}.
    let q2 = p * p * g * growth;
    let q3 = q2 * p * g * growth;
    let q4 = q3 * p * g * growth;
    let q5 = q4 * p * g * growth;
    let lead4 = match form {
        CoefficientForm::Corrected => a2 * a2,
        CoefficientForm::Printed => g.powi(4),
    };
    let c = [
        p,
        a * p - q2 * k[1],
        0.5 * p * a2 - 0.5 * k[1] * q2 * (4.0 * a - 1.0) + 2.0 / 3.0 * k[2] * q3,
        p * a3 / 6.0 - k[1] * q2 * a * (2.0 * a - 1.0) + 2.0 / 3.0 * k[2] * q3 * (3.0 * a - 1.0)
            - k[3] / 3.0 * q4,
        p * lead4 / 24.0 - k[1] / 3.0 * q2 * a2 * (4.0 * a - 3.0)
            + k[2] * q3 * (-2.0 * a + 3.0 * a2 + 1.0 / 6.0)
            - k[3] / 6.0 * q4 * (8.0 * a - 3.0)
            + 2.0 / 15.0 * k[4] * q5,
    ];
    Ok(TaylorCoefficients {
        c,
        p_hat: p,
        alpha,
    })
}

/// `Σ_{k ≤ order} c_k (1-ρ)^k` by Horner's rule.
pub fn taylor_price(coeffs: &TaylorCoefficients, rho: f64, order: usize) -> Result<f64> {
    if order > 4 {
        return Err(IndiffError::InvalidParameter {
            name: "order",
            value: order as f64,
            reason: "must be at most 4",
        });
    }
    let x = 1.0 - rho;
    Ok(coeffs.c[..=order]
        .iter()
        .rev()
        .fold(0.0, |acc, &ck| acc * x + ck))
}
