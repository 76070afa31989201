//! Plain Monte Carlo reservation prices and the price/value relation.
//!
//! For a claim `h(S_T)` held in `λ` units, the buying price is
//! `-e^{-rT}/(γ(1-ρ²)) · ln E exp(-λγ(1-ρ²) h(ŝ0·e^{η√T N}))`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{ensure_finite, IndiffError, Result};
use crate::market::{derived, AgentParams, MarketScenario};
use crate::mc::{log_mean_exp_price, sample_normals, EstimatorResult, McConfig};

pub type ZetaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Payoff `h(x) = ζ(x)·1{x ≤ K}` of one unit of the claim.
#[derive(Clone)]
pub enum PayoffSpec {
    /// `h(x) = x`.
    LongStock,
    /// `h(x) = -(K - x)+`.
    ShortPut { strike: f64 },
    /// `h(x) = (x - K)+`.
    LongCall { strike: f64 },
    /// Caller-supplied `ζ`, bounded below on `[0, cutoff]`. The cutoff may be
    /// `+∞`.
    Generic { zeta: ZetaFn, cutoff: f64 },
    /// `-h`.
    Negated(Box<PayoffSpec>),
}

impl fmt::Debug for PayoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffSpec::LongStock => write!(f, "LongStock"),
            PayoffSpec::ShortPut { strike } => write!(f, "ShortPut({strike})"),
            PayoffSpec::LongCall { strike } => write!(f, "LongCall({strike})"),
            PayoffSpec::Generic { cutoff, .. } => write!(f, "Generic(cutoff = {cutoff})"),
            PayoffSpec::Negated(inner) => write!(f, "Negated({inner:?})"),
        }
    }
}

impl PayoffSpec {
    pub fn generic<F>(zeta: F, cutoff: f64) -> PayoffSpec
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        PayoffSpec::Generic {
            zeta: Arc::new(zeta),
            cutoff,
        }
    }

    /// `h ≡ c`.
    pub fn constant(c: f64) -> PayoffSpec {
        PayoffSpec::generic(move |_| c, f64::INFINITY)
    }

    pub fn negated(self) -> PayoffSpec {
        match self {
            PayoffSpec::Negated(inner) => *inner,
            other => PayoffSpec::Negated(Box::new(other)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let strike_err = |value: f64, reason| IndiffError::InvalidParameter {
            name: "strike",
            value,
            reason,
        };
        match self {
            PayoffSpec::LongStock => Ok(()),
            PayoffSpec::ShortPut { strike } => {
                if strike.is_finite() && *strike > 0.0 {
                    Ok(())
                } else {
                    Err(strike_err(*strike, "must be finite and > 0"))
                }
            }
            PayoffSpec::LongCall { strike } => {
                if strike.is_finite() && *strike >= 0.0 {
                    Ok(())
                } else {
                    Err(strike_err(*strike, "must be finite and >= 0"))
                }
            }
            PayoffSpec::Generic { cutoff, .. } => {
                if *cutoff > 0.0 {
                    Ok(())
                } else {
                    Err(IndiffError::InvalidParameter {
                        name: "cutoff",
                        value: *cutoff,
                        reason: "must be > 0",
                    })
                }
            }
            PayoffSpec::Negated(inner) => inner.validate(),
        }
    }

    /// `h(x)`.
    pub fn payoff(&self, x: f64) -> f64 {
        match self {
            PayoffSpec::LongStock => x,
            PayoffSpec::ShortPut { strike } => -(strike - x).max(0.0),
            PayoffSpec::LongCall { strike } => (x - strike).max(0.0),
            PayoffSpec::Generic { zeta, cutoff } => {
                if x <= *cutoff {
                    zeta(x)
                } else {
                    0.0
                }
            }
            PayoffSpec::Negated(inner) => -inner.payoff(x),
        }
    }
}

/// Direct Monte Carlo estimate of the buying price using exactly
/// `mc.n_samples` draws.
pub fn price_direct(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    payoff: &PayoffSpec,
    mc: &McConfig,
) -> Result<EstimatorResult> {
    payoff.validate()?;
    let dq = derived(scenario, agent, rho)?;
    let normals = sample_normals(mc)?;
    let vol = scenario.eta * scenario.maturity.sqrt();
    let terms: Vec<f64> = normals
        .par_iter()
        .map(|&z| -dq.theta * payoff.payoff(dq.s_hat0 * (vol * z).exp()))
        .collect();
    Ok(log_mean_exp_price(&terms, -dq.price_scale)?.with_seed(mc.seed))
}

/// Selling price `-p_{-h}`.
pub fn selling_price(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    payoff: &PayoffSpec,
    mc: &McConfig,
) -> Result<EstimatorResult> {
    let flipped = payoff.clone().negated();
    Ok(price_direct(scenario, agent, rho, &flipped, mc)?.negated())
}

/// Below this exponent `e^x` is zero in double precision.
pub const UNDERFLOW_EXPONENT: f64 = -745.0;

/// An expected-utility value `V = -(1/γ)·e^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueFunction {
    pub value: f64,
    /// `ln(-V)`, finite even when `value` underflows.
    pub log_magnitude: f64,
    pub underflow: bool,
}

impl ValueFunction {
    pub(crate) fn from_exponent(gamma: f64, exponent: f64) -> Result<ValueFunction> {
        ensure_finite("value exponent", exponent)?;
        let value = -exponent.exp() / gamma;
        if value == f64::NEG_INFINITY {
            return Err(IndiffError::NonFinite {
                name: "value function",
                value,
            });
        }
        Ok(ValueFunction {
            value,
            log_magnitude: exponent - gamma.ln(),
            underflow: exponent < UNDERFLOW_EXPONENT,
        })
    }
}

/// Exponent of the value function at `price`:
/// `-γe^{rT}(x0 + price) - ((μ-r)/σ)²T/2`.
pub(crate) fn value_exponent(scenario: &MarketScenario, agent: &AgentParams, price: f64) -> f64 {
    let sh = scenario.sharpe();
    -agent.gamma * (scenario.r * scenario.maturity).exp() * (agent.x0 + price)
        - 0.5 * sh * sh * scenario.maturity
}

/// Value function of an agent whose position is worth `price`.
pub fn value_from_price(
    scenario: &MarketScenario,
    agent: &AgentParams,
    price: f64,
) -> Result<ValueFunction> {
    scenario.validate()?;
    agent.validate()?;
    ensure_finite("price", price)?;
    ValueFunction::from_exponent(agent.gamma, value_exponent(scenario, agent, price))
}
