//! Lambert decomposition of reservation prices.
//!
//! For a payoff `ζ(x)1{x ≤ K}` and a tangent line `u + v·x` below the scaled
//! payoff, the log-Laplace transform splits into a closed-form minimum
//! (through `W(θ v η²T)`) and a residual expectation close to one. The price
//! becomes `D + A`: `D` is deterministic and `A` is estimated by Monte Carlo
//! (or by quadrature, as an oracle).

use rayon::prelude::*;

use crate::error::{ensure_finite, ensure_positive, IndiffError, Result};
use crate::market::{
    derived, lambert_argument, one_minus_rho_sq, AgentParams, DerivedQuantities, MarketScenario,
};
use crate::mc::{log_mean_exp_price, mean_estimate, sample_normals, EstimatorResult, McConfig};
use crate::pricing::{price_direct, value_exponent, PayoffSpec, ValueFunction};
use crate::quadrature::{gaussian_expectation, DEFAULT_RTOL};
use crate::special_functions::lambert_w;

/// Tangent `u + v·x` and cutoff `β` used by the decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentChoice {
    pub u: f64,
    pub v: f64,
    pub beta: f64,
}

impl TangentChoice {
    pub fn new(u: f64, v: f64, beta: f64) -> Result<TangentChoice> {
        let t = TangentChoice { u, v, beta };
        t.validate()?;
        Ok(t)
    }

    /// `β = ∞` with any intercept.
    pub fn unbounded(u: f64, v: f64) -> Result<TangentChoice> {
        TangentChoice::new(u, v, f64::INFINITY)
    }

    /// Finite cutoff with the continuity intercept `u = -vβ`.
    pub fn truncated(v: f64, beta: f64) -> Result<TangentChoice> {
        TangentChoice::new(-v * beta, v, beta)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("v", self.v)?;
        ensure_finite("u", self.u)?;
        if !(self.beta > 0.0) {
            return Err(IndiffError::InvalidParameter {
                name: "beta",
                value: self.beta,
                reason: "must be > 0",
            });
        }
        if self.beta.is_finite() {
            let target = -self.v * self.beta;
            if (self.u - target).abs() > 1e-12 * target.abs().max(1.0) {
                return Err(IndiffError::InvalidParameter {
                    name: "u",
                    value: self.u,
                    reason: "a finite cutoff requires u = -v*beta",
                });
            }
        }
        Ok(())
    }
}

/// `W/s + W²/(2s)`, the tangent threshold.
fn lambert_threshold(w: f64, log_variance: f64) -> f64 {
    w * (1.0 + 0.5 * w) / log_variance
}

/// Minimiser and minimum of the exponent of the shifted Laplace integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KBetaProfile {
    pub minimizer: f64,
    pub min_value: f64,
    pub condition_ok: bool,
    /// `W(θ v η²T)`.
    pub w: f64,
    /// `W/η²T + W²/(2η²T)`.
    pub threshold: f64,
}

pub fn k_beta_minimum(
    theta: f64,
    tangent: &TangentChoice,
    eta: f64,
    maturity: f64,
) -> Result<KBetaProfile> {
    ensure_positive("theta", theta)?;
    ensure_positive("eta", eta)?;
    ensure_positive("T", maturity)?;
    tangent.validate()?;
    let s = eta * eta * maturity;
    let w = lambert_w(lambert_argument(theta, tangent.v, s))?;
    let threshold = lambert_threshold(w, s);
    let shift = -w / (eta * maturity.sqrt());
    if tangent.beta.is_infinite() {
        return Ok(KBetaProfile {
            minimizer: shift,
            min_value: threshold + theta * tangent.u,
            condition_ok: true,
            w,
            threshold,
        });
    }
    let budget = theta * tangent.v * tangent.beta;
    let condition_ok = threshold <= budget;
    Ok(KBetaProfile {
        minimizer: if condition_ok { shift } else { 0.0 },
        min_value: -(budget - threshold).max(0.0),
        condition_ok,
        w,
        threshold,
    })
}

/// Per-draw log-weight of the residual expectation after the change of
/// variable. All decompositions share it; the payoff enters only through
/// `mismatch`, the distance between the payoff and its tangent.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResidualKernel {
    /// `W / η²T`.
    w_over_s: f64,
    /// `η√T`.
    vol: f64,
    /// `θ v β`, infinite for an unbounded payoff.
    budget: f64,
}

impl ResidualKernel {
    pub(crate) fn new(w: f64, log_variance: f64, budget: f64) -> ResidualKernel {
        ResidualKernel {
            w_over_s: w / log_variance,
            vol: log_variance.sqrt(),
            budget,
        }
    }

    /// `(W/s)·e^{η√T z}`.
    fn scaled_level(&self, z: f64) -> f64 {
        self.w_over_s * (self.vol * z).exp()
    }

    /// `ln φ_β(z)`: `-(W/s)(e^x - 1 - x) + ((W/s)e^x - θvβ)+` with `x = η√T z`.
    pub(crate) fn log_phi(&self, z: f64) -> f64 {
        let x = self.vol * z;
        if self.budget.is_finite() && self.scaled_level(z) > self.budget {
            // The exponential terms cancel exactly on this branch.
            self.w_over_s * (1.0 + x) - self.budget
        } else {
            -self.w_over_s * (x.exp_m1() - x)
        }
    }
}

/// Closed-form factor `L_β` and the Monte Carlo residual `I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceDecomposition {
    pub l_beta: f64,
    pub residual: EstimatorResult,
    pub profile: KBetaProfile,
}

impl LaplaceDecomposition {
    /// Estimate of `E exp(-θ f(e^{η√T N}) 1{e^{η√T N} ≤ β})`.
    pub fn product(&self) -> EstimatorResult {
        EstimatorResult::new(
            self.l_beta * self.residual.mean,
            self.l_beta * self.residual.std_error,
            self.residual.n,
            self.residual.seed,
        )
    }
}

fn condition_error(condition: &'static str, lhs: f64, rhs: f64) -> IndiffError {
    IndiffError::ConditionViolated {
        condition,
        lhs,
        rhs,
    }
}

/// Splits `E exp(-θ f(X)1{X ≤ β})`, `X = e^{η√T N}`, into `L_β · I`.
pub fn decompose_laplace<F>(
    f: F,
    tangent: &TangentChoice,
    theta: f64,
    eta: f64,
    maturity: f64,
    mc: &McConfig,
) -> Result<LaplaceDecomposition>
where
    F: Fn(f64) -> f64 + Sync,
{
    let profile = k_beta_minimum(theta, tangent, eta, maturity)?;
    let budget = theta * tangent.v * tangent.beta;
    if !profile.condition_ok {
        return Err(condition_error("tangent condition", budget, profile.threshold));
    }
    let s = eta * eta * maturity;
    let kernel = ResidualKernel::new(profile.w, s, budget);
    // Argument of f after the change of variable is (W/(θvs))·e^{η√T z}.
    let level_to_arg = 1.0 / (theta * tangent.v);
    let normals = sample_normals(mc)?;
    let values: Vec<f64> = normals
        .par_iter()
        .map(|&z| {
            let level = kernel.scaled_level(z);
            let y = level * level_to_arg;
            let mismatch = if y <= tangent.beta {
                -theta * (f(y) - tangent.u) + level
            } else {
                0.0
            };
            (mismatch + kernel.log_phi(z)).exp()
        })
        .collect();
    let residual = mean_estimate(&values)?.with_seed(mc.seed);
    Ok(LaplaceDecomposition {
        l_beta: (-(theta * tangent.u + profile.threshold)).exp(),
        residual,
        profile,
    })
}

/// Deterministic bounds of the long-stock price as functions of `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StockBounds {
    /// Deterministic part, equal to `D`.
    pub d: f64,
    /// Upper bound on the residual.
    pub b: f64,
    /// `d + b`, an upper bound on the price.
    pub g: f64,
}

pub(crate) fn stock_bounds_from(lambda: f64, dq: &DerivedQuantities) -> StockBounds {
    let s = dq.log_variance;
    let d = deterministic_part(lambda, 0.0, lambert_threshold(dq.w_bar, s), dq);
    let b = dq.price_scale * dq.w_bar / s * (0.5 * s).exp_m1();
    StockBounds { d, b, g: d + b }
}

/// `λe^{-rT}u + e^{-rT}/(γ(1-ρ²))·threshold`.
fn deterministic_part(lambda: f64, u: f64, threshold: f64, dq: &DerivedQuantities) -> f64 {
    lambda * dq.discount * u + dq.price_scale * threshold
}

pub fn stock_bounds(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
) -> Result<StockBounds> {
    Ok(stock_bounds_from(agent.lambda, &derived(scenario, agent, rho)?))
}

/// Outcome of a Lambert decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionResult {
    /// Closed-form deterministic part `D`.
    pub deterministic: f64,
    /// Monte Carlo estimate of the residual `A`.
    pub residual: EstimatorResult,
    /// `D + A`.
    pub price: EstimatorResult,
    /// `d, b, g` where defined (long stock).
    pub bounds: Option<StockBounds>,
    /// `(D/p, G/p)` with the estimated price (long stock).
    pub ratios: Option<(f64, f64)>,
    pub condition_ok: bool,
    /// Direct estimate on the same draws, when computed.
    pub direct: Option<EstimatorResult>,
    pub w_bar: f64,
}

fn residual_estimate<K>(mc: &McConfig, scale: f64, log_weight: K) -> Result<EstimatorResult>
where
    K: Fn(f64) -> f64 + Sync,
{
    let normals = sample_normals(mc)?;
    let terms: Vec<f64> = normals.par_iter().map(|&z| log_weight(z)).collect();
    Ok(log_mean_exp_price(&terms, scale)?.with_seed(mc.seed))
}

fn assemble(
    deterministic: f64,
    residual: EstimatorResult,
    w_bar: f64,
    bounds: Option<StockBounds>,
) -> DecompositionResult {
    let price = residual.shifted(deterministic);
    let ratios = bounds.map(|b| (deterministic / price.mean, b.g / price.mean));
    DecompositionResult {
        deterministic,
        residual,
        price,
        bounds,
        ratios,
        condition_ok: true,
        direct: None,
        w_bar,
    }
}

/// Long position in `λ` units of the non-traded asset.
pub fn stock_decomposition(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    mc: &McConfig,
) -> Result<DecompositionResult> {
    let dq = derived(scenario, agent, rho)?;
    let kernel = ResidualKernel::new(dq.w_bar, dq.log_variance, f64::INFINITY);
    let residual = residual_estimate(mc, -dq.price_scale, |z| kernel.log_phi(z))?;
    let bounds = stock_bounds_from(agent.lambda, &dq);
    Ok(assemble(bounds.d, residual, dq.w_bar, Some(bounds)))
}

/// Residual of the long-stock price by adaptive quadrature.
pub fn stock_residual_quadrature(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
) -> Result<f64> {
    let dq = derived(scenario, agent, rho)?;
    let kernel = ResidualKernel::new(dq.w_bar, dq.log_variance, f64::INFINITY);
    let mean = gaussian_expectation(|z| kernel.log_phi(z).exp(), DEFAULT_RTOL);
    Ok(-dq.price_scale * mean.ln())
}

/// Deterministic long-stock price `D + Ã` with the residual by quadrature.
pub fn stock_price_quadrature(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
) -> Result<f64> {
    Ok(stock_bounds(scenario, agent, rho)?.d + stock_residual_quadrature(scenario, agent, rho)?)
}

/// Ratio bounds for `D/p` and `G/p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioBounds {
    /// `e^{-η²T/2}`, a lower bound for `D/p` uniform in the agent.
    pub lower_e: f64,
    /// `(1 + w̄/2)/(e^{η²T/2} + w̄/2)`.
    pub lower_w: f64,
    /// `1 + w̄e₂/(2η²T + η²T w̄)`.
    pub upper_w: f64,
    /// `1 + e₂/η²T`, an upper bound for `G/p` uniform in the agent.
    pub upper_e: f64,
}

/// `e^{2s} - 2(1+s)e^{s/2} + s + 1`, computed without cancellation.
pub fn second_remainder_moment(log_variance: f64) -> f64 {
    let s = log_variance;
    (2.0 * s).exp_m1() - 2.0 * (1.0 + s) * (0.5 * s).exp_m1() - s
}

pub fn stock_ratio_bounds(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
) -> Result<RatioBounds> {
    let dq = derived(scenario, agent, rho)?;
    let s = dq.log_variance;
    let w = dq.w_bar;
    let e2 = second_remainder_moment(s);
    Ok(RatioBounds {
        lower_e: (-0.5 * s).exp(),
        lower_w: (1.0 + 0.5 * w) / ((0.5 * s).exp() + 0.5 * w),
        upper_w: 1.0 + w * e2 / (2.0 * s + s * w),
        upper_e: 1.0 + e2 / s,
    })
}

/// Closed-form bounds on `V_D/V` (upper) and `V_G/V` (lower).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRatioBounds {
    pub vd_over_v_max: f64,
    pub vg_over_v_min: f64,
}

pub fn value_ratio_bounds(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
) -> Result<ValueRatioBounds> {
    let dq = derived(scenario, agent, rho)?;
    let s = dq.log_variance;
    let q = one_minus_rho_sq(rho);
    let w = dq.w_bar;
    Ok(ValueRatioBounds {
        vd_over_v_max: (w * (0.5 * s).exp_m1() / (q * s)).exp(),
        vg_over_v_min: (-w * w * second_remainder_moment(s) / (2.0 * q * s * s)).exp(),
    })
}

/// The two sides of the strike condition for the put decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrikeCondition {
    pub strike: f64,
    /// Smallest admissible strike, `(W/s + W²/(2s))/(λγ(1-ρ²))`.
    pub min_strike: f64,
    pub ok: bool,
}

pub fn put_condition(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    strike: f64,
) -> Result<StrikeCondition> {
    ensure_positive("strike", strike)?;
    let dq = derived(scenario, agent, rho)?;
    let min_strike = lambert_threshold(dq.w_bar, dq.log_variance) / dq.theta;
    Ok(StrikeCondition {
        strike,
        min_strike,
        ok: strike >= min_strike,
    })
}

/// Short position on `λ` puts, priced as `p^put = -p_{-(K-x)+}`.
///
/// `deterministic` and `price` refer to `p^put`; the condition on the strike
/// is checked in closed form before any sampling.
pub fn put_decomposition(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    strike: f64,
    mc: &McConfig,
) -> Result<DecompositionResult> {
    let cond = put_condition(scenario, agent, rho, strike)?;
    if !cond.ok {
        return Err(condition_error("strike condition", cond.strike, cond.min_strike));
    }
    let dq = derived(scenario, agent, rho)?;
    let threshold = lambert_threshold(dq.w_bar, dq.log_variance);
    let deterministic = -deterministic_part(agent.lambda, -strike, threshold, &dq);
    let kernel = ResidualKernel::new(dq.w_bar, dq.log_variance, dq.theta * strike);
    let residual = residual_estimate(mc, dq.price_scale, |z| kernel.log_phi(z))?;
    Ok(assemble(deterministic, residual, dq.w_bar, None))
}

/// Residual of `p^put` by adaptive quadrature.
pub fn put_residual_quadrature(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    strike: f64,
) -> Result<f64> {
    let cond = put_condition(scenario, agent, rho, strike)?;
    if !cond.ok {
        return Err(condition_error("strike condition", cond.strike, cond.min_strike));
    }
    let dq = derived(scenario, agent, rho)?;
    let kernel = ResidualKernel::new(dq.w_bar, dq.log_variance, dq.theta * strike);
    let mean = gaussian_expectation(|z| kernel.log_phi(z).exp(), DEFAULT_RTOL);
    Ok(dq.price_scale * mean.ln())
}

/// Strike thresholds of the call decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallThresholds {
    /// `w̄/(λγ(1-ρ²)η²T)`.
    pub k_low: f64,
    /// `ŝ0`.
    pub k_high: f64,
}

/// Strike classification relative to [`CallThresholds`].
///
/// The labels are the reverse of the usual market convention: strikes above
/// `k_high` are called in the money and strikes below `k_low` at the money.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moneyness {
    InTheMoney,
    AtTheMoney,
    OutOfTheMoney,
}

impl CallThresholds {
    pub fn classify(&self, strike: f64) -> Moneyness {
        if strike > self.k_high {
            Moneyness::InTheMoney
        } else if strike < self.k_low {
            Moneyness::AtTheMoney
        } else {
            Moneyness::OutOfTheMoney
        }
    }
}

pub fn call_thresholds(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
) -> Result<CallThresholds> {
    let dq = derived(scenario, agent, rho)?;
    Ok(CallThresholds {
        k_low: dq.w_bar / (dq.theta * dq.log_variance),
        k_high: dq.s_hat0,
    })
}

fn call_log_weight(kernel: &ResidualKernel, theta_strike: f64, z: f64) -> f64 {
    -(theta_strike - kernel.scaled_level(z)).max(0.0) + kernel.log_phi(z)
}

/// Long position on `λ` calls, with tangent `ŝ0·x - K` and no cutoff.
/// The direct estimate on the same draws is returned alongside.
pub fn call_decomposition(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    strike: f64,
    mc: &McConfig,
) -> Result<DecompositionResult> {
    let payoff = PayoffSpec::LongCall { strike };
    payoff.validate()?;
    let dq = derived(scenario, agent, rho)?;
    let threshold = lambert_threshold(dq.w_bar, dq.log_variance);
    let deterministic = deterministic_part(agent.lambda, -strike, threshold, &dq);
    let kernel = ResidualKernel::new(dq.w_bar, dq.log_variance, f64::INFINITY);
    let theta_strike = dq.theta * strike;
    let residual = residual_estimate(mc, -dq.price_scale, |z| {
        call_log_weight(&kernel, theta_strike, z)
    })?;
    let mut out = assemble(deterministic, residual, dq.w_bar, None);
    out.direct = Some(price_direct(scenario, agent, rho, &payoff, mc)?);
    Ok(out)
}

/// Residual of the call price by adaptive quadrature.
pub fn call_residual_quadrature(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    strike: f64,
) -> Result<f64> {
    let dq = derived(scenario, agent, rho)?;
    let kernel = ResidualKernel::new(dq.w_bar, dq.log_variance, f64::INFINITY);
    let theta_strike = dq.theta * strike;
    let mean = gaussian_expectation(
        |z| call_log_weight(&kernel, theta_strike, z).exp(),
        DEFAULT_RTOL,
    );
    Ok(-dq.price_scale * mean.ln())
}

/// Decomposition of a generic payoff `ζ(x)1{x ≤ K}` with a user tangent.
///
/// `tangent.u` and `tangent.v` are expressed for the normalised variable
/// `x/ŝ0`; with a finite strike, `tangent.beta` must equal `K/ŝ0`.
pub fn general_decomposition<F>(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    zeta: F,
    strike: f64,
    tangent: &TangentChoice,
    mc: &McConfig,
) -> Result<DecompositionResult>
where
    F: Fn(f64) -> f64 + Sync,
{
    let dq = derived(scenario, agent, rho)?;
    let beta = strike / dq.s_hat0;
    if strike.is_finite() && (beta - tangent.beta).abs() > 1e-12 * beta {
        return Err(IndiffError::InvalidParameter {
            name: "beta",
            value: tangent.beta,
            reason: "must equal strike / s_hat0",
        });
    }
    let s_hat0 = dq.s_hat0;
    let laplace = decompose_laplace(
        |y| zeta(s_hat0 * y),
        tangent,
        dq.theta,
        scenario.eta,
        scenario.maturity,
        mc,
    )?;
    let threshold = laplace.profile.threshold;
    let deterministic = deterministic_part(agent.lambda, tangent.u, threshold, &dq);
    let i = laplace.residual;
    if !(i.mean > 0.0) {
        return Err(IndiffError::Degenerate("non-positive residual mean"));
    }
    let residual = EstimatorResult::new(
        -dq.price_scale * i.mean.ln(),
        dq.price_scale * i.std_error / i.mean,
        i.n,
        i.seed,
    );
    let mut out = assemble(deterministic, residual, laplace.profile.w, None);
    out.condition_ok = laplace.profile.condition_ok;
    Ok(out)
}

/// Limits of `d` and `g` at `ρ → 1⁻` and `ρ → -1⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLimits {
    pub d_at_plus_one: f64,
    pub g_at_plus_one: f64,
    pub d_at_minus_one: f64,
    pub g_at_minus_one: f64,
}

pub fn boundary_limits(scenario: &MarketScenario, agent: &AgentParams) -> Result<BoundaryLimits> {
    scenario.validate()?;
    agent.validate()?;
    let m = scenario;
    let base = agent.lambda * m.discount() * m.s0;
    let tilt = m.eta * m.sharpe();
    let half_var = 0.5 * m.eta * m.eta;
    let limit = |drift: f64| base * (drift * m.maturity).exp();
    Ok(BoundaryLimits {
        d_at_plus_one: limit(m.nu - tilt - half_var),
        g_at_plus_one: limit(m.nu - tilt),
        d_at_minus_one: limit(m.nu + tilt - half_var),
        g_at_minus_one: limit(m.nu + tilt),
    })
}

/// Position whose value function is decomposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Stock,
    ShortPut { strike: f64 },
}

/// `V = V_D · V_A`, with `V_G` for the stock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueDecomposition {
    pub deterministic: ValueFunction,
    /// Estimate of the multiplicative residual `V_A`.
    pub residual_factor: f64,
    pub value: f64,
    /// 99% interval for `V`, mapped through the residual's interval.
    pub value_ci: (f64, f64),
    /// `V_G` (stock only).
    pub upper: Option<ValueFunction>,
    pub underflow: bool,
}

pub fn value_decomposition(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    position: Position,
    mc: &McConfig,
) -> Result<ValueDecomposition> {
    // Work with the buying price of the held claim: p_h = D_h + A_h.
    let (d_h, a_h, g_h) = match position {
        Position::Stock => {
            let dec = stock_decomposition(scenario, agent, rho, mc)?;
            (dec.deterministic, dec.residual, dec.bounds.map(|b| b.g))
        }
        Position::ShortPut { strike } => {
            let dec = put_decomposition(scenario, agent, rho, strike, mc)?;
            (-dec.deterministic, dec.residual.negated(), None)
        }
    };
    let growth = agent.gamma * (scenario.r * scenario.maturity).exp();
    let deterministic =
        ValueFunction::from_exponent(agent.gamma, value_exponent(scenario, agent, d_h))?;
    let factor = |a: f64| (-growth * a).exp();
    let residual_factor = factor(a_h.mean);
    let value = deterministic.value * residual_factor;
    let (lo, hi) = (
        deterministic.value * factor(a_h.ci99.0),
        deterministic.value * factor(a_h.ci99.1),
    );
    let upper = g_h
        .map(|g| ValueFunction::from_exponent(agent.gamma, value_exponent(scenario, agent, g)))
        .transpose()?;
    Ok(ValueDecomposition {
        deterministic,
        residual_factor,
        value,
        value_ci: (lo.min(hi), lo.max(hi)),
        upper,
        underflow: deterministic.underflow || value == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Preset;
    use crate::pricing::price_direct;

    fn t1(gamma: f64) -> (MarketScenario, AgentParams) {
        (
            Preset::Table1.scenario(),
            AgentParams {
                gamma,
                lambda: 2.0,
                x0: 0.0,
            },
        )
    }

    #[test]
    fn k_beta_examples() {
        // θ v η²T = e forces W = 1.
        let (eta, t) = (0.3, 0.25);
        let s = eta * eta * t;
        let tan = TangentChoice::unbounded(0.0, std::f64::consts::E / s).unwrap();
        let p = k_beta_minimum(1.0, &tan, eta, t).unwrap();
        assert!((p.w - 1.0).abs() < 1e-15);
        assert!((p.min_value - 1.5 / s).abs() < 1e-12 / s);
        assert!((p.minimizer + 1.0 / (eta * t.sqrt())).abs() < 1e-12);

        // Budget exactly on the threshold.
        let v = 3.0;
        let w = lambert_w(2.0 * v * s).unwrap();
        let thr = lambert_threshold(w, s);
        let beta = thr / (2.0 * v);
        let tan = TangentChoice::truncated(v, beta).unwrap();
        let p = k_beta_minimum(2.0, &tan, eta, t).unwrap();
        if p.condition_ok {
            assert!(p.min_value.abs() < 1e-15);
            assert!((p.minimizer + w / (eta * t.sqrt())).abs() < 1e-15);
        }

        // Budget below threshold.
        let tan = TangentChoice::truncated(v, 0.5 * beta).unwrap();
        let p = k_beta_minimum(2.0, &tan, eta, t).unwrap();
        assert!(!p.condition_ok);
        assert_eq!((p.minimizer, p.min_value), (0.0, 0.0));
    }

    #[test]
    fn tangent_validation() {
        assert!(TangentChoice::new(1.0, 1.0, 2.0).is_err());
        assert!(TangentChoice::new(0.0, 0.0, f64::INFINITY).is_err());
        assert!(TangentChoice::truncated(2.0, 3.0).is_ok());
    }

    #[test]
    fn laplace_of_zero_is_one() {
        let tan = TangentChoice::unbounded(0.0, 1e-12).unwrap();
        let d = decompose_laplace(|_| 0.0, &tan, 1.0, 0.3, 0.25, &McConfig::new(2000, 3)).unwrap();
        assert!((d.product().mean - 1.0).abs() < 1e-6);
    }

    #[test]
    fn laplace_condition_error() {
        let tan = TangentChoice::truncated(1.0, 1e-3).unwrap();
        let e = decompose_laplace(|y| y, &tan, 1.0, 0.3, 0.25, &McConfig::new(100, 1)).unwrap_err();
        assert!(matches!(e, IndiffError::ConditionViolated { .. }));
    }

    #[test]
    fn d_vanishes_with_lambda() {
        let (m, mut a) = t1(0.5);
        a.lambda = 1e-12;
        let d = stock_decomposition(&m, &a, 0.0, &McConfig::new(200, 1)).unwrap();
        assert!(d.deterministic <= 1e-6);
    }

    #[test]
    fn stock_matches_general_path() {
        let (m, a) = t1(4.0);
        let mc = McConfig::new(3000, 21);
        let rho = -0.4;
        let stock = stock_decomposition(&m, &a, rho, &mc).unwrap();
        let dq = derived(&m, &a, rho).unwrap();
        let tan = TangentChoice::unbounded(0.0, dq.s_hat0).unwrap();
        let gen = general_decomposition(&m, &a, rho, |x| x, f64::INFINITY, &tan, &mc).unwrap();
        assert_eq!(stock.deterministic, gen.deterministic);
        assert!((stock.price.mean - gen.price.mean).abs() < 1e-9 * stock.price.mean);
    }

    #[test]
    fn put_matches_general_path() {
        let (m, a) = t1(0.5);
        let mc = McConfig::new(3000, 22);
        let (rho, k) = (0.0, 110.0);
        let put = put_decomposition(&m, &a, rho, k, &mc).unwrap();
        let dq = derived(&m, &a, rho).unwrap();
        let tan = TangentChoice::truncated(dq.s_hat0, k / dq.s_hat0).unwrap();
        let gen = general_decomposition(&m, &a, rho, |x| x - k, k, &tan, &mc).unwrap();
        assert!((put.deterministic + gen.deterministic).abs() < 1e-9 * put.deterministic.abs());
        assert!((put.price.mean + gen.price.mean).abs() < 1e-8 * put.price.mean.abs());
    }

    #[test]
    fn put_deterministic_formula() {
        let (m, a) = t1(0.5);
        let k = 95.0;
        let put = put_decomposition(&m, &a, 0.3, k, &McConfig::new(100, 1)).unwrap();
        let dq = derived(&m, &a, 0.3).unwrap();
        let s = m.eta * m.eta * m.maturity;
        let w = dq.w_bar;
        let expect = a.lambda * (-m.r * m.maturity).exp() * k
            - (-m.r * m.maturity).exp() / (a.gamma * (1.0 - 0.09)) * (w / s + w * w / (2.0 * s));
        assert!((put.deterministic - expect).abs() < 1e-10 * expect.abs());
    }

    #[test]
    fn put_condition_violation_reports_sides() {
        let m = Preset::Table2.scenario();
        let a = AgentParams {
            gamma: 0.1,
            lambda: 20.0,
            x0: 0.0,
        };
        let e = put_decomposition(&m, &a, 0.8, 1.0, &McConfig::new(100, 1)).unwrap_err();
        match e {
            IndiffError::ConditionViolated { lhs, rhs, .. } => {
                assert_eq!(lhs, 1.0);
                assert!(rhs > 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn put_weight_is_one_at_origin() {
        let k = ResidualKernel::new(0.2, 0.0225, 10.0);
        assert_eq!(k.log_phi(0.0), 0.0);
    }

    #[test]
    fn call_at_zero_strike_is_stock() {
        let (m, a) = t1(0.5);
        let mc = McConfig::new(2000, 5);
        let call = call_decomposition(&m, &a, 0.8, 0.0, &mc).unwrap();
        let stock = stock_decomposition(&m, &a, 0.8, &mc).unwrap();
        assert_eq!(call.deterministic, stock.deterministic);
        assert_eq!(call.residual, stock.residual);
    }

    #[test]
    fn call_threshold_order() {
        for &(g, rho) in &[(0.5, 0.8), (4.0, 0.0), (15.0, -0.8)] {
            let (m, a) = t1(g);
            let th = call_thresholds(&m, &a, rho).unwrap();
            assert!(th.k_low <= th.k_high);
        }
        let (m, a) = t1(1e-9);
        let th = call_thresholds(&m, &a, 0.0).unwrap();
        assert!((th.k_low / th.k_high - 1.0).abs() < 1e-6);
        assert_eq!(th.classify(th.k_high * 2.0), Moneyness::InTheMoney);
        assert_eq!(th.classify(th.k_low * 0.5), Moneyness::AtTheMoney);
    }

    #[test]
    fn stock_bounds_order_and_direct_check() {
        let (m, a) = t1(0.5);
        let mc = McConfig::new(10_000, 13);
        let dec = stock_decomposition(&m, &a, 0.0, &mc).unwrap();
        let b = dec.bounds.unwrap();
        assert!(b.d <= b.g);
        assert!(dec.residual.mean >= -3.0 * dec.residual.std_error);
        let direct = price_direct(&m, &a, 0.0, &PayoffSpec::LongStock, &mc).unwrap();
        assert!(direct.mean + 3.0 * direct.std_error >= b.d);
    }

    #[test]
    fn boundary_limits_match_taylor_base() {
        let (m, a) = t1(0.5);
        let lim = boundary_limits(&m, &a).unwrap();
        assert!(lim.d_at_plus_one < lim.g_at_plus_one);
        assert!(lim.d_at_minus_one < lim.g_at_minus_one);
        let near = stock_bounds(&m, &a, 1.0 - 1e-6).unwrap();
        assert!((near.d / lim.d_at_plus_one - 1.0).abs() < 1e-4);
        assert!((near.g / lim.g_at_plus_one - 1.0).abs() < 1e-4);
    }

    #[test]
    fn value_shift_in_initial_wealth() {
        let m = Preset::Table2.scenario();
        let mut a = AgentParams {
            gamma: 0.1,
            lambda: 20.0,
            x0: 0.0,
        };
        let mc = McConfig::new(200, 2);
        let v0 = value_decomposition(&m, &a, -0.5, Position::Stock, &mc).unwrap();
        a.x0 = 3.0;
        let v1 = value_decomposition(&m, &a, -0.5, Position::Stock, &mc).unwrap();
        let factor = (-a.gamma * (m.r * m.maturity).exp() * 3.0).exp();
        let expect = v0.deterministic.value * factor;
        assert!((v1.deterministic.value - expect).abs() < 1e-13 * expect.abs());
    }

    #[test]
    fn second_moment_matches_expanded_form() {
        for &s in &[0.01f64, 0.0225, 0.9] {
            let naive = (2.0 * s).exp() - 2.0 * (1.0 + s) * (0.5 * s).exp() + s + 1.0;
            assert!((second_remainder_moment(s) - naive).abs() < 1e-12);
        }
    }
}
