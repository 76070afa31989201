//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Indifference prices of claims on a non-traded asset.
///
/// Rates, drifts and volatilities are per annum; horizons are in years.
/// Every command writes CSV whose first line is a comment recording the
/// resolved inputs.
#[derive(Debug, Parser)]
#[command(name = "indiff", version)]
pub struct Cli {
    /// Worker threads (output does not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Direct and Lambert prices with deterministic bounds.
    Price(PriceArgs),
    /// Closed-form analysis of the deterministic part.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Value function and its deterministic factor.
    Value(ValueArgs),
    /// Path simulation of a hedging strategy.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Reference market: table1, table2 or table3.
    #[arg(long)]
    pub preset: Option<String>,
    /// `key = value` file with any of r, T, s0, nu, eta, mu, sigma, gamma,
    /// lambda, x0, rho. Applied after the preset.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Horizon in years.
    #[arg(long = "T")]
    pub maturity: Option<f64>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Absolute risk aversion.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Units of the claim held.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Initial wealth.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Correlation for single-point runs.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write CSV here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Round reals to this many decimals (default: 17 significant digits).
    #[arg(long)]
    pub round: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// Monte Carlo draws per estimate.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Antithetic pairs (z, -z).
    #[arg(long)]
    pub antithetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Rho,
    Gamma,
    K,
    T,
}

/// `AXIS MIN MAX POINTS`.
#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Sweep an input over a uniform grid: AXIS MIN MAX POINTS with AXIS one
    /// of rho, gamma, K, T.
    #[arg(long, num_args = 4, value_names = ["AXIS", "MIN", "MAX", "POINTS"], allow_hyphen_values = true)]
    pub sweep: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PayoffKind {
    Stock,
    Put,
    Call,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = PayoffKind::Stock)]
    pub payoff: PayoffKind,
    /// Strike of the put or call.
    #[arg(long = "K", alias = "strike")]
    pub strike: Option<f64>,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Minimising correlation over a list of horizons.
    RhoStar(RhoStarArgs),
    /// Ratio bounds of the deterministic part and upper bound.
    RatioBounds(RatioBoundsArgs),
    /// Deterministic part as a function of risk aversion.
    GammaProfile(GammaProfileArgs),
    /// d, b, g and the quadrature price over correlation.
    Bounds(GridArgs),
    /// Expansion in powers of 1 - rho against the quadrature price.
    Taylor(TaylorArgs),
}

#[derive(Debug, Args)]
pub struct RhoStarArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated horizons (default: the scenario horizon).
    #[arg(long = "T-list", value_delimiter = ',')]
    pub t_list: Vec<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RatioBoundsArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated risk aversions (default: --gamma, else 0.5).
    #[arg(long = "gamma-list", value_delimiter = ',')]
    pub gamma_list: Vec<f64>,
    #[arg(
        long = "rho-list",
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-0.8,-0.5,-0.2,0.2,0.5,0.8"
    )]
    pub rho_list: Vec<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GammaProfileArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long = "gamma-list", value_delimiter = ',', default_value = "0.01,0.1,1,10,100")]
    pub gamma_list: Vec<f64>,
    /// Exit with status 3 unless the profile is strictly decreasing.
    #[arg(long)]
    pub check_decreasing: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TaylorArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Use the coefficients exactly as printed (raw cumulants, gamma^4).
    #[arg(long)]
    pub printed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PositionKind {
    Stock,
    Put,
}

#[derive(Debug, Args)]
pub struct ValueArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = PositionKind::Stock)]
    pub position: PositionKind,
    #[arg(long = "K", alias = "strike")]
    pub strike: Option<f64>,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Deterministic,
    FdOptimal,
    Zero,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated correlations, one row each (default: --rho).
    #[arg(long = "rho-list", value_delimiter = ',', allow_hyphen_values = true)]
    pub rho_list: Vec<f64>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Deterministic)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from minus the price (implies --initial-wealth auto unless set).
    #[arg(long)]
    pub superhedge: bool,
    /// auto (minus the price at each rho), rho-star (minus the price at the
    /// minimising correlation) or a number. Default: x0.
    #[arg(long = "initial-wealth", allow_hyphen_values = true)]
    pub initial_wealth: Option<String>,
    /// Leave the claim out of terminal wealth.
    #[arg(long)]
    pub no_endowment: bool,
    /// Draws for the price behind --initial-wealth.
    #[arg(long, default_value_t = 10_000)]
    pub price_samples: usize,
    /// Draws per price in the finite-difference strategy.
    #[arg(long, default_value_t = 256)]
    pub inner_samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    /// Also write per-path terminal values to this CSV file.
    #[arg(long)]
    pub terminals: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}
