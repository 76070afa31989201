//! One function per subcommand, each producing a table.

use std::path::Path;

use lambert_indiff::analysis::{
    bounds_at, d_bar_gamma_profile, rho_star, rho_star_large_t, rho_star_small_t,
    uniform_lower_bounds, Regime,
};
use lambert_indiff::decomposition::{
    boundary_limits, call_decomposition, put_decomposition, stock_decomposition,
    stock_price_quadrature, stock_ratio_bounds, value_decomposition, DecompositionResult,
    Position,
};
use lambert_indiff::hedging::{
    resolve_initial_wealth, simulate, InitialWealth, SimGrid, StrategyConfig, StrategyKind,
};
use lambert_indiff::mc::splitmix64;
use lambert_indiff::pricing::price_direct;
use lambert_indiff::taylor::{taylor_coefficients, taylor_price, CoefficientForm};
use lambert_indiff::{AgentParams, EstimatorResult, IndiffError, McConfig, PayoffSpec};

use crate::args::{
    GammaProfileArgs, GridArgs, McArgs, PayoffKind, PositionKind, PriceArgs, RatioBoundsArgs,
    RhoStarArgs, SimulateArgs, StrategyArg, SweepAxis, TaylorArgs, ValueArgs,
};
use crate::error::CliError;
use crate::output::{Cell, Manifest, Table};
use crate::scenario::{parse_sweep, points, resolve, Point, Resolved, Sweep};

fn mc_config(args: &McArgs) -> Result<McConfig, CliError> {
    let mc = McConfig {
        antithetic: args.antithetic,
        ..McConfig::new(args.samples, args.seed)
    };
    mc.validate()?;
    Ok(mc)
}

fn record_mc(m: &mut Manifest, mc: &McConfig) {
    m.set("samples", mc.n_samples)
        .set("seed", mc.seed)
        .set("antithetic", mc.antithetic);
}

fn agent_at(base: &Resolved, p: &Point) -> Result<AgentParams, CliError> {
    let mut a = base.agent().or_else(|e| p.gamma.map(|g| AgentParams {
        gamma: g,
        lambda: base.lambda,
        x0: base.x0,
    }).ok_or(e))?;
    if let Some(g) = p.gamma {
        a.gamma = g;
    }
    Ok(a)
}

fn leading_columns(sweep: Option<&Sweep>) -> Vec<String> {
    match sweep {
        Some(s) if s.axis != SweepAxis::Rho => vec![s.label().to_string(), "rho".into()],
        _ => vec!["rho".into()],
    }
}

fn leading_cells(sweep: Option<&Sweep>, p: &Point) -> Vec<Cell> {
    match sweep {
        Some(s) if s.axis != SweepAxis::Rho => vec![p.axis_value.into(), p.rho.into()],
        _ => vec![p.rho.into()],
    }
}

/// Index of the grid point nearest to the minimising correlation, when it
/// is interior and the sweep runs over correlation.
fn marker_index(base: &Resolved, sweep: Option<&Sweep>, pts: &[Point]) -> Result<Option<usize>, CliError> {
    if sweep.map(|s| s.axis) != Some(SweepAxis::Rho) {
        return Ok(None);
    }
    let rep = rho_star(&base.market, &base.agent()?)?;
    if rep.regime != Regime::Interior {
        return Ok(None);
    }
    Ok(pts
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.rho - rep.rho_star).abs().total_cmp(&(b.1.rho - rep.rho_star).abs()))
        .map(|(i, _)| i))
}

/// A per-point condition failure becomes a flag in sweeps and an error for
/// single points.
fn tolerate_condition<T>(
    result: lambert_indiff::Result<T>,
    in_sweep: bool,
) -> Result<Option<T>, CliError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(IndiffError::ConditionViolated { .. }) if in_sweep => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn strike_for(kind: PayoffKind, p: &Point) -> Result<f64, CliError> {
    p.strike
        .filter(|_| kind != PayoffKind::Stock)
        .ok_or_else(|| CliError::Usage("--K is required for put and call payoffs".into()))
}

pub fn price(args: &PriceArgs) -> Result<(), CliError> {
    let base = resolve(&args.scenario)?;
    let sweep = parse_sweep(&args.sweep)?;
    let mc = mc_config(&args.mc)?;
    let pts = points(&base, sweep.as_ref(), args.strike);
    let marker = marker_index(&base, sweep.as_ref(), &pts).unwrap_or(None);
    let in_sweep = sweep.is_some();

    let mut columns = leading_columns(sweep.as_ref());
    columns.extend(
        [
            "p_direct", "p_direct_ci_lo", "p_direct_ci_hi", "p_lambert", "p_lambert_ci_lo",
            "p_lambert_ci_hi", "D", "d", "g", "var_direct", "var_lambert", "rho_star_marker",
            "rho_star", "condition_violated",
        ]
        .map(String::from),
    );
    let mut table = Table::new(&columns);
    for (i, p) in pts.iter().enumerate() {
        let agent = agent_at(&base, p)?;
        let m = &p.market;
        let (direct, lambert): (EstimatorResult, Option<DecompositionResult>) = match args.payoff {
            PayoffKind::Stock => (
                price_direct(m, &agent, p.rho, &PayoffSpec::LongStock, &mc)?,
                Some(stock_decomposition(m, &agent, p.rho, &mc)?),
            ),
            PayoffKind::Put => {
                let strike = strike_for(args.payoff, p)?;
                // Reported as the price of the put position, -p_{-(K-x)+}.
                let direct =
                    price_direct(m, &agent, p.rho, &PayoffSpec::ShortPut { strike }, &mc)?.negated();
                let dec = tolerate_condition(
                    put_decomposition(m, &agent, p.rho, strike, &mc),
                    in_sweep,
                )?;
                (direct, dec)
            }
            PayoffKind::Call => {
                let strike = strike_for(args.payoff, p)?;
                let dec = call_decomposition(m, &agent, p.rho, strike, &mc)?;
                (dec.direct.expect("call decomposition carries the direct estimate"), Some(dec))
            }
        };
        let bounds = if args.payoff == PayoffKind::Stock {
            Some(bounds_at(m, &agent, p.rho)?)
        } else {
            None
        };
        let star = rho_star(m, &agent)?;
        let mut row = leading_cells(sweep.as_ref(), p);
        row.extend([
            direct.mean.into(),
            direct.ci99.0.into(),
            direct.ci99.1.into(),
            lambert.map(|d| d.price.mean).into(),
            lambert.map(|d| d.price.ci99.0).into(),
            lambert.map(|d| d.price.ci99.1).into(),
            lambert.map(|d| d.deterministic).into(),
            bounds.map(|b| b.d).into(),
            bounds.map(|b| b.g).into(),
            direct.variance().into(),
            lambert.map(|d| d.price.variance()).into(),
            (marker == Some(i)).into(),
            star.rho_star.into(),
            lambert.is_none().into(),
        ]);
        table.push(row);
    }

    let mut man = Manifest::new("price");
    base.record(&mut man);
    man.set("payoff", format!("{:?}", args.payoff).to_lowercase());
    if let Some(k) = args.strike {
        man.set("K", k);
    }
    if let Some(s) = &sweep {
        s.record(&mut man);
    }
    record_mc(&mut man, &mc);
    table.emit(args.out.output.as_deref(), &man, args.out.round)?;
    Ok(())
}

pub fn rho_star_table(args: &RhoStarArgs) -> Result<(), CliError> {
    let base = resolve(&args.scenario)?;
    let agent = base.agent()?;
    let horizons = if args.t_list.is_empty() {
        vec![base.market.maturity]
    } else {
        args.t_list.clone()
    };
    let mut table = Table::new(&[
        "T", "rho_star", "regime", "rho_star_small_t", "small_t_rel_err", "rho_star_large_t",
        "d_at_zero", "d_at_star", "identity_gap",
    ]);
    let large = rho_star_large_t(&base.market).ok();
    for &t in &horizons {
        let mut m = base.market;
        m.maturity = t;
        let rep = rho_star(&m, &agent)?;
        let approx = rho_star_small_t(&m, &agent)?;
        table.push(vec![
            t.into(),
            rep.rho_star.into(),
            rep.regime.label().into(),
            approx.into(),
            ((approx - rep.rho_star) / rep.rho_star).abs().into(),
            large.into(),
            rep.d_at_zero.into(),
            rep.d_at_star.into(),
            rep.identity_gap.into(),
        ]);
    }
    let mut man = Manifest::new("analyze rho-star");
    base.record(&mut man);
    man.set(
        "T-list",
        horizons.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
    );
    table.emit(args.out.output.as_deref(), &man, args.out.round)?;
    Ok(())
}

pub fn ratio_bounds(args: &RatioBoundsArgs) -> Result<(), CliError> {
    let base = resolve(&args.scenario)?;
    let gammas = if !args.gamma_list.is_empty() {
        args.gamma_list.clone()
    } else {
        vec![base.gamma.unwrap_or(0.5)]
    };
    let mut table = Table::new(&["gamma", "rho", "lower_e", "lower_w", "upper_w", "upper_e"]);
    let mut uniform = None;
    for &g in &gammas {
        let agent = AgentParams {
            gamma: g,
            lambda: base.lambda,
            x0: base.x0,
        };
        for &rho in &args.rho_list {
            let r = stock_ratio_bounds(&base.market, &agent, rho)?;
            uniform = Some((r.lower_e, r.upper_e));
            table.push(vec![
                g.into(),
                rho.into(),
                r.lower_e.into(),
                r.lower_w.into(),
                r.upper_w.into(),
                r.upper_e.into(),
            ]);
        }
    }
    if let Some((lo, hi)) = uniform {
        table.push(vec![
            "summary".into(),
            "summary".into(),
            lo.into(),
            Cell::Empty,
            Cell::Empty,
            hi.into(),
        ]);
    }
    let mut man = Manifest::new("analyze ratio-bounds");
    base.record(&mut man);
    man.set("gamma-list", join(&gammas)).set("rho-list", join(&args.rho_list));
    table.emit(args.out.output.as_deref(), &man, args.out.round)?;
    Ok(())
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn gamma_profile(args: &GammaProfileArgs) -> Result<(), CliError> {
    let base = resolve(&args.scenario)?;
    let prof = d_bar_gamma_profile(&base.market, base.lambda, base.rho, &args.gamma_list)?;
    let mut table = Table::new(&["gamma", "d_bar", "small_gamma_limit"]);
    for &(g, d) in &prof.points {
        table.push(vec![g.into(), d.into(), prof.small_gamma_limit.into()]);
    }
    let mut man = Manifest::new("analyze gamma-profile");
    base.record(&mut man);
    man.set("gamma-list", join(&args.gamma_list))
        .set("strictly_decreasing", prof.strictly_decreasing);
    table.emit(args.out.output.as_deref(), &man, args.out.round)?;
    if args.check_decreasing && !prof.strictly_decreasing {
        return Err(CliError::CheckFailed(
            "deterministic part is not strictly decreasing in gamma on this grid".into(),
        ));
    }
    Ok(())
}

fn rho_grid(args: &GridArgs) -> Result<Sweep, CliError> {
    let sweep = parse_sweep(&args.sweep)?.unwrap_or(Sweep {
        axis: SweepAxis::Rho,
        min: -0.99,
        max: 0.99,
        points: 199,
    });
    if sweep.axis != SweepAxis::Rho {
        return Err(CliError::Usage("this command sweeps rho only".into()));
    }
    Ok(sweep)
}

pub fn bounds(args: &GridArgs) -> Result<(), CliError> {
    let base = resolve(&args.scenario)?;
    let agent = base.agent()?;
    let sweep = rho_grid(args)?;
    let floor = uniform_lower_bounds(&base.market, &agent)?;
    let mut table = Table::new(&["kind", "rho", "d", "b", "g", "p_quadrature", "p_floor"]);
    for rho in sweep.values() {
        let b = bounds_at(&base.market, &agent, rho)?;
        table.push(vec![
            "grid".into(),
            rho.into(),
            b.d.into(),
            b.b.into(),
            b.g.into(),
            stock_price_quadrature(&base.market, &agent, rho)?.into(),
            floor.p_floor.into(),
        ]);
    }
    let lim = boundary_limits(&base.market, &agent)?;
    for (rho, d, g) in [
        (-1.0, lim.d_at_minus_one, lim.g_at_minus_one),
        (1.0, lim.d_at_plus_one, lim.g_at_plus_one),
    ] {
        table.push(vec![
            "limit".into(),
            rho.into(),
            d.into(),
            (g - d).into(),
            g.into(),
            Cell::Empty,
            floor.p_floor.into(),
        ]);
    }
    let mut man = Manifest::new("analyze bounds");
    base.record(&mut man);
    sweep.record(&mut man);
    man.set("v_floor", floor.v_floor);
    table.emit(args.out.output.as_deref(), &man, args.out.round)?;
    Ok(())
}

pub fn taylor(args: &TaylorArgs) -> Result<(), CliError> {
    let base = resolve(&args.grid.scenario)?;
    let agent = base.agent()?;
    let sweep = rho_grid(&args.grid)?;
    let form = if args.printed {
        CoefficientForm::Printed
    } else {
        CoefficientForm::Corrected
    };
    let coeffs = taylor_coefficients(&base.market, &agent, form)?;
    let mut table = Table::new(&[
        "rho", "taylor_0", "taylor_1", "taylor_2", "taylor_3", "taylor_4", "p_quadrature",
        "rel_err_4",
    ]);
    for rho in sweep.values() {
        let mut row: Vec<Cell> = vec![rho.into()];
        for order in 0..=4 {
            row.push(taylor_price(&coeffs, rho, order)?.into());
        }
        let p = stock_price_quadrature(&base.market, &agent, rho)?;
        let t4 = taylor_price(&coeffs, rho, 4)?;
        row.push(p.into());
        row.push(((t4 - p) / p).abs().into());
        table.push(row);
    }
    let mut man = Manifest::new("analyze taylor");
    base.record(&mut man);
    sweep.record(&mut man);
    man.set("form", if args.printed { "printed" } else { "corrected" });
    for (k, c) in coeffs.c.iter().enumerate() {
        man.set(&format!("c{k}"), c);
    }
    table.emit(args.grid.out.output.as_deref(), &man, args.grid.out.round)?;
    Ok(())
}

pub fn value(args: &ValueArgs) -> Result<(), CliError> {
    let base = resolve(&args.scenario)?;
    let sweep = parse_sweep(&args.sweep)?;
    let mc = mc_config(&args.mc)?;
    let pts = points(&base, sweep.as_ref(), args.strike);
    let mut columns = leading_columns(sweep.as_ref());
    columns.extend(
        ["V_D", "V_A", "V", "V_ci_lo", "V_ci_hi", "V_G", "underflow", "condition_violated"]
            .map(String::from),
    );
    let mut table = Table::new(&columns);
    for p in &pts {
        let agent = agent_at(&base, p)?;
        let position = match args.position {
            PositionKind::Stock => Position::Stock,
            PositionKind::Put => Position::ShortPut {
                strike: p.strike.ok_or_else(|| {
                    CliError::Usage("--K is required for the put position".into())
                })?,
            },
        };
        let dec = tolerate_condition(
            value_decomposition(&p.market, &agent, p.rho, position, &mc),
            sweep.is_some(),
        )?;
        let mut row = leading_cells(sweep.as_ref(), p);
        row.extend([
            dec.map(|v| v.deterministic.value).into(),
            dec.map(|v| v.residual_factor).into(),
            dec.map(|v| v.value).into(),
            dec.map(|v| v.value_ci.0).into(),
            dec.map(|v| v.value_ci.1).into(),
            dec.and_then(|v| v.upper.map(|u| u.value)).into(),
            dec.map_or(Cell::Empty, |v| v.underflow.into()),
            dec.is_none().into(),
        ]);
        table.push(row);
    }
    let mut man = Manifest::new("value");
    base.record(&mut man);
    man.set("position", format!("{:?}", args.position).to_lowercase());
    if let Some(k) = args.strike {
        man.set("K", k);
    }
    if let Some(s) = &sweep {
        s.record(&mut man);
    }
    record_mc(&mut man, &mc);
    table.emit(args.out.output.as_deref(), &man, args.out.round)?;
    Ok(())
}

fn initial_wealth_mode(args: &SimulateArgs, x0: f64) -> Result<InitialWealth, CliError> {
    match args.initial_wealth.as_deref() {
        Some("auto") => Ok(InitialWealth::NegPriceAtRho),
        Some("rho-star") => Ok(InitialWealth::NegPriceAtRhoStar),
        Some(raw) => raw
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(InitialWealth::Fixed)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "--initial-wealth expects auto, rho-star or a number, got {raw:?}"
                ))
            }),
        None if args.superhedge => Ok(InitialWealth::NegPriceAtRho),
        None => Ok(InitialWealth::Fixed(x0)),
    }
}

pub fn simulate_table(args: &SimulateArgs) -> Result<(), CliError> {
    let base = resolve(&args.scenario)?;
    let agent = base.agent()?;
    let rhos = if args.rho_list.is_empty() {
        vec![base.rho]
    } else {
        args.rho_list.clone()
    };
    let grid = SimGrid {
        n_steps: args.steps,
        n_paths: args.paths,
        seed: args.seed,
    };
    grid.validate()?;
    let kind = match args.strategy {
        StrategyArg::Deterministic => StrategyKind::Deterministic,
        StrategyArg::FdOptimal => StrategyKind::FdOptimal,
        StrategyArg::Zero => StrategyKind::Zero,
    };
    let price_mc = McConfig::new(args.price_samples, splitmix64(args.seed));
    price_mc.validate()?;
    let strategy = StrategyConfig {
        fd_rel_step: args.fd_step,
        inner_mc: McConfig::new(args.inner_samples, splitmix64(args.seed ^ 1)),
        ..StrategyConfig::new(kind)
    };
    strategy.validate()?;
    let mode = initial_wealth_mode(args, base.x0)?;
    let include_endowment = !args.no_endowment;

    let mut table = Table::new(&[
        "rho", "initial_wealth", "expected_utility", "eu_std_error", "eu_ci_lo", "eu_ci_hi",
        "value_lambert", "superhedge_prob", "superhedge_lo", "superhedge_hi", "terminal_mean",
        "terminal_sd", "terminal_q05", "terminal_q50", "terminal_q95", "discounted_wealth_mean",
    ]);
    let mut terminals = Table::new(&["rho", "path", "wealth", "endowment", "discounted_wealth"]);
    for &rho in &rhos {
        let x_init = resolve_initial_wealth(mode, &base.market, &agent, rho, &price_mc)?;
        let out = simulate(&base.market, &agent, rho, &strategy, &grid, x_init, include_endowment)?;
        let v = value_decomposition(&base.market, &agent, rho, Position::Stock, &price_mc)?;
        let eu = out.expected_utility;
        table.push(vec![
            rho.into(),
            x_init.into(),
            eu.mean.into(),
            eu.std_error.into(),
            eu.ci99.0.into(),
            eu.ci99.1.into(),
            v.value.into(),
            out.superhedge.p.into(),
            out.superhedge.wilson99.0.into(),
            out.superhedge.wilson99.1.into(),
            out.terminal.mean.into(),
            out.terminal.std.into(),
            out.terminal.q05.into(),
            out.terminal.q50.into(),
            out.terminal.q95.into(),
            out.discounted_wealth.mean.into(),
        ]);
        if args.terminals.is_some() {
            for (i, p) in out.paths.iter().enumerate() {
                terminals.push(vec![
                    rho.into(),
                    i.into(),
                    p.wealth.into(),
                    p.endowment.into(),
                    p.discounted_wealth.into(),
                ]);
            }
        }
    }
    let mut man = Manifest::new("simulate");
    base.record(&mut man);
    man.set("rho-list", join(&rhos))
        .set("strategy", format!("{:?}", args.strategy).to_lowercase())
        .set("paths", grid.n_paths)
        .set("steps", grid.n_steps)
        .set("seed", grid.seed)
        .set(
            "initial-wealth",
            args.initial_wealth.as_deref().unwrap_or(if args.superhedge { "auto" } else { "x0" }),
        )
        .set("endowment", include_endowment)
        .set("price-samples", price_mc.n_samples);
    if kind == StrategyKind::FdOptimal {
        man.set("inner-samples", strategy.inner_mc.n_samples)
            .set("fd-step", strategy.fd_rel_step);
    }
    table.emit(args.out.output.as_deref(), &man, args.out.round)?;
    if let Some(path) = &args.terminals {
        terminals.emit(Some(Path::new(path)), &man, args.out.round)?;
    }
    Ok(())
}
