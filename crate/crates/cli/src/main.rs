mod args;
mod commands;
mod error;
mod output;
mod scenario;

use std::process::ExitCode;

use clap::Parser;

use args::{AnalyzeCommand, Cli, Command};
use error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Price(a) => commands::price(a),
        Command::Analyze(AnalyzeCommand::RhoStar(a)) => commands::rho_star_table(a),
        Command::Analyze(AnalyzeCommand::RatioBounds(a)) => commands::ratio_bounds(a),
        Command::Analyze(AnalyzeCommand::GammaProfile(a)) => commands::gamma_profile(a),
        Command::Analyze(AnalyzeCommand::Bounds(a)) => commands::bounds(a),
        Command::Analyze(AnalyzeCommand::Taylor(a)) => commands::taylor(a),
        Command::Value(a) => commands::value(a),
        Command::Simulate(a) => commands::simulate_table(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
