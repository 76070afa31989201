//! Model constants, the quantities derived from them, and preset markets.
//!
//! The non-traded asset follows `dS = S(ν dt + η dZ)` and the traded one
//! `dP = P(μ dt + σ dB)` with `d⟨B, Z⟩ = ρ dt`. Rates and volatilities are
//! per annum and horizons are in years.

use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_finite, ensure_positive, IndiffError, Result};
use crate::special_functions::lambert_w;

/// Largest admissible `|ρ|`. Closer to one the `1/(1-ρ²)` factor destroys
/// all significant digits; the `ρ → ±1` limits are available in closed form.
pub const RHO_LIMIT: f64 = 1.0 - 1e-6;

/// Exogenous market constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketScenario {
    pub r: f64,
    pub maturity: f64,
    pub s0: f64,
    pub nu: f64,
    pub eta: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Risk preferences and position of the agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    pub gamma: f64,
    pub lambda: f64,
    pub x0: f64,
}

impl MarketScenario {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("r", self.r)?;
        ensure_finite("nu", self.nu)?;
        ensure_finite("mu", self.mu)?;
        ensure_positive("T", self.maturity)?;
        ensure_positive("s0", self.s0)?;
        ensure_positive("eta", self.eta)?;
        ensure_positive("sigma", self.sigma)?;
        Ok(())
    }

    /// Sharpe ratio `(μ - r)/σ` of the traded asset.
    pub fn sharpe(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    /// Total log-variance `η²T` of the non-traded asset over the horizon.
    pub fn log_variance(&self) -> f64 {
        self.eta * self.eta * self.maturity
    }

    pub fn discount(&self) -> f64 {
        (-self.r * self.maturity).exp()
    }

    /// The same market seen from time `t` with spot `s`: remaining horizon
    /// `T - t`, initial price `s`.
    pub fn from_time(&self, t: f64, s: f64) -> Result<MarketScenario> {
        let remaining = self.maturity - t;
        if !(t >= 0.0) || !(remaining > 0.0) {
            return Err(IndiffError::InvalidParameter {
                name: "t",
                value: t,
                reason: "must satisfy 0 <= t < T",
            });
        }
        let shifted = MarketScenario {
            maturity: remaining,
            s0: s,
            ..*self
        };
        shifted.validate()?;
        Ok(shifted)
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("gamma", self.gamma)?;
        ensure_positive("lambda", self.lambda)?;
        ensure_finite("x0", self.x0)?;
        Ok(())
    }
}

/// Quantities shared by every pricing formula at a given correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    pub rho: f64,
    /// Risk-neutralised drift `ν - ρη(μ-r)/σ` of the non-traded asset.
    pub delta: f64,
    pub sharpe: f64,
    /// `λγ(1-ρ²)`.
    pub theta: f64,
    /// `s0·exp((δ - η²/2)T)`.
    pub s_hat0: f64,
    /// `W(ŝ0·η²T·θ)`.
    pub w_bar: f64,
    /// `η²T`.
    pub log_variance: f64,
    /// `e^{-rT}/(γ(1-ρ²))`, the factor in front of every log-Laplace term.
    pub price_scale: f64,
    pub discount: f64,
}

pub fn check_rho(rho: f64) -> Result<f64> {
    ensure_finite("rho", rho)?;
    if rho.abs() > RHO_LIMIT {
        return Err(IndiffError::CorrelationOutOfRange(rho));
    }
    Ok(rho)
}

/// Argument of W in every deterministic part. Shared so that the stock, call
/// and general paths agree to the last bit.
pub(crate) fn lambert_argument(theta: f64, slope: f64, log_variance: f64) -> f64 {
    theta * slope * log_variance
}

/// `1 - ρ²` without cancellation near `|ρ| = 1`.
pub(crate) fn one_minus_rho_sq(rho: f64) -> f64 {
    (1.0 - rho) * (1.0 + rho)
}

pub fn derived(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
) -> Result<DerivedQuantities> {
    check_rho(rho)?;
    derived_open(scenario, agent, rho)
}

/// Same as [`derived`] on the whole open interval `|ρ| < 1`.
pub(crate) fn derived_open(
    scenario: &MarketScenario,
    agent: &AgentParams,
    rho: f64,
) -> Result<DerivedQuantities> {
    scenario.validate()?;
    agent.validate()?;
    ensure_finite("rho", rho)?;
    if rho.abs() >= 1.0 {
        return Err(IndiffError::CorrelationOutOfRange(rho));
    }
    let sharpe = scenario.sharpe();
    let delta = scenario.nu - rho * scenario.eta * sharpe;
    let log_variance = scenario.log_variance();
    let q = one_minus_rho_sq(rho);
    let theta = agent.lambda * agent.gamma * q;
    let s_hat0 =
        scenario.s0 * ((delta - 0.5 * scenario.eta * scenario.eta) * scenario.maturity).exp();
    let w_bar = lambert_w(lambert_argument(theta, s_hat0, log_variance))?;
    let discount = scenario.discount();
    Ok(DerivedQuantities {
        rho,
        delta,
        sharpe,
        theta,
        s_hat0,
        w_bar,
        log_variance,
        price_scale: discount / (agent.gamma * q),
        discount,
    })
}

/// Markets used for the reference tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Table1,
    Table2,
    Table3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Table1, Preset::Table2, Preset::Table3];

    pub fn scenario(self) -> MarketScenario {
        let (r, maturity, s0, nu, eta, mu, sigma) = match self {
            Preset::Table1 => (0.001, 0.25, 100.0, 0.20, 0.30, 0.10, 0.20),
            Preset::Table2 => (0.001, 0.3, 1.0, 0.35, 0.40, 0.10, 0.20),
            Preset::Table3 => (0.001, 10.0, 100.0, 0.30, 0.30, 0.05, 0.10),
        };
        MarketScenario {
            r,
            maturity,
            s0,
            nu,
            eta,
            mu,
            sigma,
        }
    }

    /// Number of units of the claim held in the reference position.
    pub fn default_lambda(self) -> f64 {
        match self {
            Preset::Table1 => 2.0,
            Preset::Table2 => 20.0,
            Preset::Table3 => 10.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
        }
    }
}

impl FromStr for Preset {
    type Err = IndiffError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| IndiffError::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Looks up a preset by name, returning its market and default `λ`.
pub fn preset(name: &str) -> Result<(MarketScenario, f64)> {
    let p: Preset = name.parse()?;
    Ok((p.scenario(), p.default_lambda()))
}

/// Values read from a `key = value` scenario file. Absent keys stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioOverrides {
    pub r: Option<f64>,
    pub maturity: Option<f64>,
    pub s0: Option<f64>,
    pub nu: Option<f64>,
    pub eta: Option<f64>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub x0: Option<f64>,
    pub rho: Option<f64>,
}

impl ScenarioOverrides {
    pub fn apply_market(&self, base: &mut MarketScenario) {
        let pairs = [
            (&mut base.r, self.r),
            (&mut base.maturity, self.maturity),
            (&mut base.s0, self.s0),
            (&mut base.nu, self.nu),
            (&mut base.eta, self.eta),
            (&mut base.mu, self.mu),
            (&mut base.sigma, self.sigma),
        ];
        for (slot, value) in pairs {
            if let Some(v) = value {
                *slot = v;
            }
        }
    }

    pub fn apply_agent(&self, base: &mut AgentParams) {
        if let Some(v) = self.gamma {
            base.gamma = v;
        }
        if let Some(v) = self.lambda {
            base.lambda = v;
        }
        if let Some(v) = self.x0 {
            base.x0 = v;
        }
    }

    fn slot(&mut self, key: &str) -> Option<&mut Option<f64>> {
        Some(match key {
            "r" => &mut self.r,
            "T" => &mut self.maturity,
            "s0" => &mut self.s0,
            "nu" => &mut self.nu,
            "eta" => &mut self.eta,
            "mu" => &mut self.mu,
            "sigma" => &mut self.sigma,
            "gamma" => &mut self.gamma,
            "lambda" => &mut self.lambda,
            "x0" => &mut self.x0,
            "rho" => &mut self.rho,
            _ => return None,
        })
    }
}

impl FromStr for ScenarioOverrides {
    type Err = IndiffError;

    /// Parses lines of `key = value`; `#` starts a comment.
    fn from_str(text: &str) -> Result<Self> {
        let mut out = ScenarioOverrides::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| IndiffError::Parse {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found {line:?}")))?;
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid number for {key}: {:?}", value.trim())))?;
            let slot = out
                .slot(key)
                .ok_or_else(|| err(format!("unknown key {key:?}")))?;
            if slot.is_some() {
                return Err(err(format!("duplicate key {key:?}")));
            }
            *slot = Some(value);
        }
        Ok(out)
    }
}
