//! Hedging strategies and their path-wise performance.
//!
//! At time `t` with spot `s`, the remaining problem is the original one with
//! horizon `T - t` and initial price `s`. The deterministic strategy uses the
//! sensitivity of the closed-form part `d_t`; the finite-difference strategy
//! bumps the full Lambert price `d_t + a_t` on common random numbers.

use rayon::prelude::*;

use crate::analysis::{rho_star, Regime};
use crate::decomposition::{stock_bounds_from, stock_decomposition, stock_residual_quadrature, ResidualKernel};
use crate::error::{IndiffError, Result};
use crate::market::{derived, one_minus_rho_sq, AgentParams, MarketScenario};
use crate::mc::{
    mean_estimate, sample_normals, wilson_interval, EstimatorResult, McConfig, NormalStream,
    RunningStats, Z99,
};
use crate::special_functions::lambert_w;

/// Below this remaining horizon the strategy uses its `t → T` limit.
pub const MATURITY_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    /// Closed form built on the deterministic part.
    Deterministic,
    /// Finite difference of the Lambert Monte Carlo price.
    FdOptimal,
    /// No position in the traded asset.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Relative spot bump for the finite difference.
    pub fd_rel_step: f64,
    /// Draws used for the residual in the finite difference.
    pub inner_mc: McConfig,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> StrategyConfig {
        StrategyConfig {
            kind,
            fd_rel_step: 1e-3,
            inner_mc: McConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fd_rel_step > 0.0 && self.fd_rel_step < 0.1) {
            return Err(IndiffError::InvalidParameter {
                name: "fd_rel_step",
                value: self.fd_rel_step,
                reason: "must lie in (0, 0.1)",
            });
        }
        if self.kind == StrategyKind::FdOptimal {
            self.inner_mc.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimGrid {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for SimGrid {
    fn default() -> Self {
        SimGrid {
            n_steps: 200,
            n_paths: 10_000,
            seed: 0,
        }
    }
}

impl SimGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 1 {
            return Err(IndiffError::InvalidParameter {
                name: "n_steps",
                value: self.n_steps as f64,
                reason: "n_steps ≥ 1",
            });
        }
        if self.n_paths < 2 {
            return Err(IndiffError::InvalidParameter {
                name: "n_paths",
                value: self.n_paths as f64,
                reason: "n_paths ≥ 2",
            });
        }
        Ok(())
    }
}

/// Deterministic part of the price at `(t, s)` and its spot sensitivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicQuantities {
    pub w_t: f64,
    pub d_t: f64,
    pub ddt_ds: f64,
}

pub fn dynamic_quantities(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    t: f64,
    s: f64,
) -> Result<DynamicQuantities> {
    let local = scenario.from_time(t, s)?;
    let dq = derived(&local, agent, rho)?;
    let bounds = stock_bounds_from(agent.lambda, &dq);
    Ok(DynamicQuantities {
        w_t: dq.w_bar,
        d_t: bounds.d,
        ddt_ds: agent.lambda * dq.discount * dq.w_bar / (dq.theta * dq.log_variance * s),
    })
}

/// How the residual `a_t` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualMethod {
    Quadrature,
    MonteCarlo(McConfig),
}

pub fn dynamic_residual(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    t: f64,
    s: f64,
    method: ResidualMethod,
) -> Result<EstimatorResult> {
    let local = scenario.from_time(t, s)?;
    match method {
        ResidualMethod::Quadrature => Ok(EstimatorResult::exact(
            stock_residual_quadrature(&local, agent, rho)?,
            0,
            0,
        )),
        ResidualMethod::MonteCarlo(mc) => {
            Ok(stock_decomposition(&local, agent, rho, &mc)?.residual)
        }
    }
}

/// Cash held in the traded asset, with a standard error for the
/// finite-difference strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyValue {
    pub value: f64,
    pub std_error: f64,
}

/// Evaluates a strategy repeatedly with shared precomputation.
struct StrategyEvaluator {
    config: StrategyConfig,
    scenario: MarketScenario,
    agent: AgentParams,
    rho: f64,
    merton: f64,
    theta: f64,
    drift: f64,
    normals: Vec<f64>,
}

impl StrategyEvaluator {
    fn new(
        config: &StrategyConfig,
        scenario: &MarketScenario,
        agent: &AgentParams,
        rho: f64,
    ) -> Result<StrategyEvaluator> {
        config.validate()?;
        let dq = derived(scenario, agent, rho)?;
        let normals = if config.kind == StrategyKind::FdOptimal && rho != 0.0 {
            sample_normals(&config.inner_mc)?
        } else {
            Vec::new()
        };
        Ok(StrategyEvaluator {
            config: *config,
            scenario: *scenario,
            agent: *agent,
            rho,
            merton: (scenario.mu - scenario.r) / (agent.gamma * scenario.sigma * scenario.sigma),
            theta: dq.theta,
            drift: dq.delta - 0.5 * scenario.eta * scenario.eta,
            normals,
        })
    }

    fn value(&self, t: f64, s: f64) -> Result<StrategyValue> {
        let m = &self.scenario;
        let remaining = m.maturity - t;
        if !(t >= 0.0) || !(remaining > 0.0) {
            return Err(IndiffError::InvalidParameter {
                name: "t",
                value: t,
                reason: "must satisfy 0 <= t < T",
            });
        }
        let exact = |value| Ok(StrategyValue {
            value,
            std_error: 0.0,
        });
        match self.config.kind {
            StrategyKind::Zero => exact(0.0),
            _ if self.rho == 0.0 => exact((-m.r * remaining).exp() * self.merton),
            StrategyKind::Deterministic => exact(self.deterministic(remaining, s)?),
            StrategyKind::FdOptimal => self.finite_difference(t, s),
        }
    }

    fn deterministic(&self, remaining: f64, s: f64) -> Result<f64> {
        let m = &self.scenario;
        let rho = self.rho;
        if remaining < MATURITY_EPSILON {
            return Ok(self.merton - rho * s * m.eta * self.agent.lambda / m.sigma);
        }
        let s_tau = m.eta * m.eta * remaining;
        let w = lambert_w(s * s_tau * (self.drift * remaining).exp() * self.theta)?;
        let q = one_minus_rho_sq(rho);
        Ok((-m.r * remaining).exp()
            * (self.merton - rho * w / (m.sigma * m.eta * self.agent.gamma * q * remaining)))
    }

    /// `e^{-rτ}(μ-r)/(γσ²) - (ηρ/σ)·s·∂p_t/∂s` with a central difference.
    fn finite_difference(&self, t: f64, s: f64) -> Result<StrategyValue> {
        let m = &self.scenario;
        let h = self.config.fd_rel_step * s;
        let up = self.bumped_price(t, s + h)?;
        let down = self.bumped_price(t, s - h)?;
        // Linearised residual difference per draw, for the paired error.
        let influence: Vec<f64> = up
            .weights
            .iter()
            .zip(&down.weights)
            .map(|(a, b)| -up.scale * a + down.scale * b)
            .collect();
        let se_diff = mean_estimate(&influence)?.std_error;
        let slope = (up.price - down.price) / (2.0 * h);
        let factor = m.eta * self.rho / m.sigma * s;
        let remaining = m.maturity - t;
        Ok(StrategyValue {
            value: (-m.r * remaining).exp() * self.merton - factor * slope,
            std_error: factor.abs() * se_diff / (2.0 * h),
        })
    }

    fn bumped_price(&self, t: f64, s: f64) -> Result<BumpedPrice> {
        let local = self.scenario.from_time(t, s)?;
        let dq = derived(&local, &self.agent, self.rho)?;
        let d = stock_bounds_from(self.agent.lambda, &dq).d;
        let kernel = ResidualKernel::new(dq.w_bar, dq.log_variance, f64::INFINITY);
        let raw: Vec<f64> = self.normals.iter().map(|&z| kernel.log_phi(z).exp()).collect();
        let mut stats = RunningStats::default();
        raw.iter().for_each(|&y| stats.push(y));
        let mean = stats.mean();
        Ok(BumpedPrice {
            price: d - dq.price_scale * mean.ln(),
            scale: dq.price_scale,
            weights: raw.iter().map(|y| y / mean).collect(),
        })
    }
}

struct BumpedPrice {
    price: f64,
    scale: f64,
    /// Per-draw weight over its sample mean.
    weights: Vec<f64>,
}

pub fn strategy_value(
    config: &StrategyConfig,
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    t: f64,
    s: f64,
) -> Result<StrategyValue> {
    StrategyEvaluator::new(config, scenario, agent, rho)?.value(t, s)
}

/// Choice of initial wealth for a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialWealth {
    Fixed(f64),
    /// Minus the Lambert price at the simulated correlation.
    NegPriceAtRho,
    /// Minus the Lambert price at the minimising correlation.
    NegPriceAtRhoStar,
}

pub fn resolve_initial_wealth(
    mode: InitialWealth,
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    price_mc: &McConfig,
) -> Result<f64> {
    match mode {
        InitialWealth::Fixed(x) => Ok(x),
        InitialWealth::NegPriceAtRho => {
            Ok(-stock_decomposition(scenario, agent, rho, price_mc)?.price.mean)
        }
        InitialWealth::NegPriceAtRhoStar => {
            let report = rho_star(scenario, agent)?;
            if report.regime != Regime::Interior {
                return Err(IndiffError::Precondition(format!(
                    "minimising correlation is {} ({})",
                    report.rho_star,
                    report.regime.label()
                )));
            }
            Ok(-stock_decomposition(scenario, agent, report.rho_star, price_mc)?.price.mean)
        }
    }
}

/// A binomial proportion with its Wilson 99% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProportionEstimate {
    pub p: f64,
    pub std_error: f64,
    pub wilson99: (f64, f64),
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalSummary {
    pub mean: f64,
    pub std: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

/// Terminal state of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    /// `X_T`.
    pub wealth: f64,
    /// `λS_T`.
    pub endowment: f64,
    /// `e^{-rT}X_T`.
    pub discounted_wealth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub expected_utility: EstimatorResult,
    /// Per-path standard deviation of the utility.
    pub utility_sd: f64,
    pub superhedge: ProportionEstimate,
    /// Summary of `X_T + λS_T` (or `X_T` without endowment).
    pub terminal: TerminalSummary,
    pub discounted_wealth: EstimatorResult,
    pub initial_wealth: f64,
    pub paths: Vec<PathRecord>,
}

/// Simulates `grid.n_paths` paths with exact lognormal steps for both assets
/// and Euler rebalancing of the wealth. Path `p` uses stream `p`.
pub fn simulate(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
    strategy: &StrategyConfig,
    grid: &SimGrid,
    initial_wealth: f64,
    include_endowment: bool,
) -> Result<SimOutcome> {
    grid.validate()?;
    if !initial_wealth.is_finite() {
        return Err(IndiffError::NonFinite {
            name: "initial wealth",
            value: initial_wealth,
        });
    }
    let eval = StrategyEvaluator::new(strategy, scenario, agent, rho)?;
    let m = *scenario;
    let dt = m.maturity / grid.n_steps as f64;
    let sq = dt.sqrt();
    let p_drift = (m.mu - m.r - 0.5 * m.sigma * m.sigma) * dt;
    let s_drift = (m.nu - 0.5 * m.eta * m.eta) * dt;
    let orth = one_minus_rho_sq(rho).sqrt();

    let paths = (0..grid.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut normals = NormalStream::new(grid.seed, p as u64);
            let mut spot = m.s0;
            let mut wealth = initial_wealth;
            for k in 0..grid.n_steps {
                let t = k as f64 * dt;
                let cash = eval.value(t, spot)?.value;
                let b = normals.next_normal();
                let w = normals.next_normal();
                let ret = (p_drift + m.sigma * sq * b).exp_m1();
                wealth += cash * (-m.r * t).exp() * ret;
                let z = rho * b + orth * w;
                spot *= (s_drift + m.eta * sq * z).exp();
            }
            Ok(PathRecord {
                wealth: (m.r * m.maturity).exp() * wealth,
                endowment: agent.lambda * spot,
                discounted_wealth: wealth,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    summarise(agent, &paths, initial_wealth, include_endowment)
}

fn summarise(
    agent: &AgentParams,
    paths: &[PathRecord],
    initial_wealth: f64,
    include_endowment: bool,
) -> Result<SimOutcome> {
    let total = |r: &PathRecord| {
        if include_endowment {
            r.wealth + r.endowment
        } else {
            r.wealth
        }
    };
    let totals: Vec<f64> = paths.iter().map(total).collect();
    let utilities: Vec<f64> = totals
        .iter()
        .map(|x| -(-agent.gamma * x).exp() / agent.gamma)
        .collect();
    let expected_utility = mean_estimate(&utilities)?;
    let utility_sd = RunningStats::from_slice(&utilities).std_dev();

    let n = paths.len();
    let hits = totals.iter().filter(|&&x| x >= 0.0).count();
    let p = hits as f64 / n as f64;
    let superhedge = ProportionEstimate {
        p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        wilson99: wilson_interval(hits as u64, n as u64, Z99),
        n,
    };

    let stats = RunningStats::from_slice(&totals);
    let mut sorted = totals.clone();
    sorted.sort_by(f64::total_cmp);
    let terminal = TerminalSummary {
        mean: stats.mean(),
        std: stats.std_dev(),
        q05: quantile(&sorted, 0.05),
        q50: quantile(&sorted, 0.50),
        q95: quantile(&sorted, 0.95),
    };
    let discounted: Vec<f64> = paths.iter().map(|r| r.discounted_wealth).collect();
    Ok(SimOutcome {
        expected_utility,
        utility_sd,
        superhedge,
        terminal,
        discounted_wealth: mean_estimate(&discounted)?,
        initial_wealth,
        paths: paths.to_vec(),
    })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
