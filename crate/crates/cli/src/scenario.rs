//! Turns preset, file and flags into model inputs.

use std::fs;

use lambert_indiff::market::ScenarioOverrides;
use lambert_indiff::{AgentParams, MarketScenario, Preset};

use crate::args::{ScenarioArgs, SweepArgs, SweepAxis};
use crate::error::CliError;
use crate::output::Manifest;

#[derive(Debug, Clone)]
pub struct Resolved {
    pub preset: Option<Preset>,
    pub market: MarketScenario,
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub x0: f64,
    pub rho: f64,
}

impl Resolved {
    pub fn agent(&self) -> Result<AgentParams, CliError> {
        let gamma = self
            .gamma
            .ok_or_else(|| CliError::Usage("risk aversion is required: pass --gamma".into()))?;
        Ok(AgentParams {
            gamma,
            lambda: self.lambda,
            x0: self.x0,
        })
    }

    pub fn record(&self, m: &mut Manifest) {
        if let Some(p) = self.preset {
            m.set("preset", p);
        }
        let k = &self.market;
        m.set("r", k.r)
            .set("T", k.maturity)
            .set("s0", k.s0)
            .set("nu", k.nu)
            .set("eta", k.eta)
            .set("mu", k.mu)
            .set("sigma", k.sigma)
            .set("lambda", self.lambda)
            .set("x0", self.x0)
            .set("rho", self.rho);
        if let Some(g) = self.gamma {
            m.set("gamma", g);
        }
    }
}

fn from_preset(p: Preset) -> ScenarioOverrides {
    let m = p.scenario();
    ScenarioOverrides {
        r: Some(m.r),
        maturity: Some(m.maturity),
        s0: Some(m.s0),
        nu: Some(m.nu),
        eta: Some(m.eta),
        mu: Some(m.mu),
        sigma: Some(m.sigma),
        lambda: Some(p.default_lambda()),
        ..ScenarioOverrides::default()
    }
}

fn from_flags(a: &ScenarioArgs) -> ScenarioOverrides {
    ScenarioOverrides {
        r: a.r,
        maturity: a.maturity,
        s0: a.s0,
        nu: a.nu,
        eta: a.eta,
        mu: a.mu,
        sigma: a.sigma,
        gamma: a.gamma,
        lambda: a.lambda,
        x0: a.x0,
        rho: a.rho,
    }
}

/// Fields of `top` that are set replace those of `base`.
fn layer(base: &mut ScenarioOverrides, top: &ScenarioOverrides) {
    let slots = [
        (&mut base.r, top.r),
        (&mut base.maturity, top.maturity),
        (&mut base.s0, top.s0),
        (&mut base.nu, top.nu),
        (&mut base.eta, top.eta),
        (&mut base.mu, top.mu),
        (&mut base.sigma, top.sigma),
        (&mut base.gamma, top.gamma),
        (&mut base.lambda, top.lambda),
        (&mut base.x0, top.x0),
        (&mut base.rho, top.rho),
    ];
    for (slot, value) in slots {
        if value.is_some() {
            *slot = value;
        }
    }
}

fn required(value: Option<f64>, flag: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| {
        CliError::Usage(format!(
            "missing --{flag} (give it directly, in --scenario, or use --preset)"
        ))
    })
}

pub fn resolve(args: &ScenarioArgs) -> Result<Resolved, CliError> {
    let preset = args.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    let mut acc = preset.map(from_preset).unwrap_or_default();
    if let Some(path) = &args.scenario {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        layer(&mut acc, &text.parse::<ScenarioOverrides>()?);
    }
    layer(&mut acc, &from_flags(args));
    let market = MarketScenario {
        r: required(acc.r, "r")?,
        maturity: required(acc.maturity, "T")?,
        s0: required(acc.s0, "s0")?,
        nu: required(acc.nu, "nu")?,
        eta: required(acc.eta, "eta")?,
        mu: required(acc.mu, "mu")?,
        sigma: required(acc.sigma, "sigma")?,
    };
    market.validate()?;
    Ok(Resolved {
        preset,
        market,
        lambda: required(acc.lambda, "lambda")?,
        gamma: acc.gamma,
        x0: acc.x0.unwrap_or(0.0),
        rho: acc.rho.unwrap_or(0.0),
    })
}

/// A uniform grid over one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn label(&self) -> &'static str {
        match self.axis {
            SweepAxis::Rho => "rho",
            SweepAxis::Gamma => "gamma",
            SweepAxis::K => "K",
            SweepAxis::T => "T",
        }
    }

    pub fn record(&self, m: &mut Manifest) {
        m.set(
            "sweep",
            format!("{}:{}:{}:{}", self.label(), self.min, self.max, self.points),
        );
    }
}

pub fn parse_sweep(args: &SweepArgs) -> Result<Option<Sweep>, CliError> {
    let Some(raw) = &args.sweep else {
        return Ok(None);
    };
    let axis = match raw[0].as_str() {
        "rho" => SweepAxis::Rho,
        "gamma" => SweepAxis::Gamma,
        "K" | "strike" => SweepAxis::K,
        "T" => SweepAxis::T,
        other => {
            return Err(CliError::Usage(format!(
                "unknown sweep axis {other:?} (expected rho, gamma, K or T)"
            )))
        }
    };
    let number = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::Usage(format!("invalid sweep bound {s:?}")))
    };
    let (min, max) = (number(&raw[1])?, number(&raw[2])?);
    let points: usize = raw[3]
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid sweep point count {:?}", raw[3])))?;
    if points < 2 {
        return Err(CliError::Usage("a sweep needs at least 2 points".into()));
    }
    if !(min < max) {
        return Err(CliError::Usage("sweep requires MIN < MAX".into()));
    }
    let positive_axis = matches!(axis, SweepAxis::Gamma | SweepAxis::K | SweepAxis::T);
    if positive_axis && !(min > 0.0) {
        return Err(CliError::Usage(format!("{} sweep must stay positive", raw[0])));
    }
    Ok(Some(Sweep {
        axis,
        min,
        max,
        points,
    }))
}

/// Inputs for one row of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub axis_value: f64,
    pub market: MarketScenario,
    pub gamma: Option<f64>,
    pub rho: f64,
    pub strike: Option<f64>,
}

pub fn points(base: &Resolved, sweep: Option<&Sweep>, strike: Option<f64>) -> Vec<Point> {
    let single = Point {
        axis_value: base.rho,
        market: base.market,
        gamma: base.gamma,
        rho: base.rho,
        strike,
    };
    let Some(sw) = sweep else {
        return vec![single];
    };
    sw.values()
        .into_iter()
        .map(|v| {
            let mut p = single;
            p.axis_value = v;
            match sw.axis {
                SweepAxis::Rho => p.rho = v,
                SweepAxis::Gamma => p.gamma = Some(v),
                SweepAxis::K => p.strike = Some(v),
                SweepAxis::T => p.market.maturity = v,
            }
            p
        })
        .collect()
}
