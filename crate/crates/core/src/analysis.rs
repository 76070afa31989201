//! Closed-form study of the deterministic long-stock part `d(ρ)`.

use crate::decomposition::{stock_bounds_from, StockBounds};
use crate::error::{ensure_positive, IndiffError, Result};
use crate::market::{derived_open, AgentParams, MarketScenario};
use crate::special_functions::lambert_w_of_exp;

/// Tolerance used to classify `ρ*` against `±1`.
pub const REGIME_TOLERANCE: f64 = 1e-12;

/// Above this `ln κ` the deterministic part is not representable.
const MAX_LOG_KAPPA: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Interior,
    /// `ρ* ≤ -1`: `d` increases on the whole interval.
    LeftSaturated,
    /// `ρ* ≥ 1`: `d` decreases on the whole interval.
    RightSaturated,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Interior => "interior",
            Regime::LeftSaturated => "left-saturated",
            Regime::RightSaturated => "right-saturated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoStarReport {
    pub rho_star: f64,
    pub regime: Regime,
    /// `d(ρ*)`, interior regime only.
    pub d_at_star: Option<f64>,
    /// `|d(ρ*) - (d(0) - e^{-rT}(μ-r)²T/(2γσ²))|`.
    pub identity_gap: Option<f64>,
    /// Same identity for `g`.
    pub g_identity_gap: Option<f64>,
    /// `d(0)`, absent when it overflows.
    pub d_at_zero: Option<f64>,
}

/// `d, b, g` on the open interval `|ρ| < 1`.
pub fn bounds_at(scenario: &MarketScenario, agent: &AgentParams, rho: f64) -> Result<StockBounds> {
    Ok(stock_bounds_from(
        agent.lambda,
        &derived_open(scenario, agent, rho)?,
    ))
}

/// `λγs0η²T·e^{(ν-η²/2)T}`, the Lambert argument at `ρ = 0`.
pub fn kappa(scenario: &MarketScenario, agent: &AgentParams) -> f64 {
    log_kappa(scenario, agent).exp()
}

/// `ln κ`, finite for horizons where `κ` overflows.
pub fn log_kappa(scenario: &MarketScenario, agent: &AgentParams) -> f64 {
    let m = scenario;
    (agent.lambda * agent.gamma * m.s0 * m.log_variance()).ln()
        + (m.nu - 0.5 * m.eta * m.eta) * m.maturity
}

/// Drop of `d` between `ρ = 0` and its minimiser.
pub fn minimum_drop(scenario: &MarketScenario, agent: &AgentParams) -> f64 {
    let sh = scenario.sharpe();
    scenario.discount() * sh * sh * scenario.maturity / (2.0 * agent.gamma)
}

fn classify(rho_star: f64) -> Regime {
    if rho_star <= -1.0 + REGIME_TOLERANCE {
        Regime::LeftSaturated
    } else if rho_star >= 1.0 - REGIME_TOLERANCE {
        Regime::RightSaturated
    } else {
        Regime::Interior
    }
}

/// Correlation minimising `d`: `ηT·(μ-r)/σ / W(κ)`.
///
/// The identities at `ρ*` are evaluated only when `d` is representable, so
/// very long horizons still get `ρ*` and its regime.
pub fn rho_star(scenario: &MarketScenario, agent: &AgentParams) -> Result<RhoStarReport> {
    scenario.validate()?;
    agent.validate()?;
    let lk = log_kappa(scenario, agent);
    let w = lambert_w_of_exp(lk)?;
    let rho_star = scenario.eta * scenario.maturity * scenario.sharpe() / w;
    let regime = classify(rho_star);
    let mut report = RhoStarReport {
        rho_star,
        regime,
        d_at_star: None,
        identity_gap: None,
        g_identity_gap: None,
        d_at_zero: None,
    };
    if lk > MAX_LOG_KAPPA {
        return Ok(report);
    }
    let at_zero = bounds_at(scenario, agent, 0.0)?;
    report.d_at_zero = Some(at_zero.d);
    if regime == Regime::Interior {
        let drop = minimum_drop(scenario, agent);
        let at_star = bounds_at(scenario, agent, rho_star)?;
        report.d_at_star = Some(at_star.d);
        report.identity_gap = Some((at_star.d - (at_zero.d - drop)).abs());
        report.g_identity_gap = Some((at_star.g - (at_zero.g - drop)).abs());
    }
    Ok(report)
}

/// Grid pairs on which `d` moves the wrong way.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub rho_star: f64,
    pub regime: Regime,
    pub violations: Vec<(f64, f64)>,
}

impl MonotonicityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `d` decreases left of `ρ*` and increases right of it.
pub fn d_monotonicity_check(
    scenario: &MarketScenario,
    agent: &AgentParams,
    grid: &[f64],
) -> Result<MonotonicityReport> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(IndiffError::Precondition(
            "correlation grid must be strictly increasing".into(),
        ));
    }
    let report = rho_star(scenario, agent)?;
    let values = grid
        .iter()
        .map(|&r| bounds_at(scenario, agent, r).map(|b| b.d))
        .collect::<Result<Vec<_>>>()?;
    let star = report.rho_star;
    let mut violations = Vec::new();
    for i in 1..grid.len() {
        let (r0, r1) = (grid[i - 1], grid[i]);
        let (d0, d1) = (values[i - 1], values[i]);
        let slack = 1e-12 * d0.abs().max(d1.abs());
        let bad = if r1 <= star {
            d1 > d0 + slack
        } else if r0 >= star {
            d1 < d0 - slack
        } else {
            false
        };
        if bad {
            violations.push((r0, r1));
        }
    }
    Ok(MonotonicityReport {
        rho_star: star,
        regime: report.regime,
        violations,
    })
}

/// First-order small-horizon approximation of `ρ*`.
pub fn rho_star_small_t(scenario: &MarketScenario, agent: &AgentParams) -> Result<f64> {
    scenario.validate()?;
    agent.validate()?;
    let m = scenario;
    let base = m.eta * m.s0 * agent.lambda * agent.gamma;
    let slope = m.eta - (m.nu - 0.5 * m.eta * m.eta) / base;
    Ok(m.sharpe() * (1.0 / base + slope * m.maturity))
}

/// Limit of `ρ*` as the horizon grows, `(μ-r)/σ · η/(ν - η²/2)`.
pub fn rho_star_large_t(scenario: &MarketScenario) -> Result<f64> {
    scenario.validate()?;
    let m = scenario;
    let drift = m.nu - 0.5 * m.eta * m.eta;
    if !(drift > 0.0) {
        return Err(IndiffError::Precondition(format!(
            "requires nu > eta^2/2 (nu = {}, eta^2/2 = {})",
            m.nu,
            0.5 * m.eta * m.eta
        )));
    }
    Ok(m.sharpe() * m.eta / drift)
}

/// Lower bounds on price and value that hold for every correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformLowerBounds {
    pub p_floor: f64,
    pub v_floor: f64,
}

pub fn uniform_lower_bounds(
    scenario: &MarketScenario,
    agent: &AgentParams,
) -> Result<UniformLowerBounds> {
    let d0 = bounds_at(scenario, agent, 0.0)?.d;
    let growth = (scenario.r * scenario.maturity).exp();
    Ok(UniformLowerBounds {
        p_floor: d0 - minimum_drop(scenario, agent),
        v_floor: -(-agent.gamma * growth * (agent.x0 + d0)).exp() / agent.gamma,
    })
}

/// `d` as a function of risk aversion at fixed `λ` and `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaProfile {
    pub points: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
    /// `λe^{-rT}ŝ0`, the value as `γ → 0`.
    pub small_gamma_limit: f64,
}

pub fn d_bar_gamma_profile(
    scenario: &MarketScenario,
    lambda: f64,
    rho: f64,
    gamma_grid: &[f64],
) -> Result<GammaProfile> {
    if gamma_grid.is_empty() || gamma_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(IndiffError::Precondition(
            "risk-aversion grid must be non-empty and strictly increasing".into(),
        ));
    }
    ensure_positive("gamma", gamma_grid[0])?;
    let points = gamma_grid
        .iter()
        .map(|&gamma| {
            let agent = AgentParams {
                gamma,
                lambda,
                x0: 0.0,
            };
            bounds_at(scenario, &agent, rho).map(|b| (gamma, b.d))
        })
        .collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    let agent = AgentParams {
        gamma: 1.0,
        lambda,
        x0: 0.0,
    };
    let dq = derived_open(scenario, &agent, rho)?;
    Ok(GammaProfile {
        points,
        strictly_decreasing,
        small_gamma_limit: lambda * dq.discount * dq.s_hat0,
    })
}
