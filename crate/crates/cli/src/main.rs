//! `augport` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "augport", version, about = "Data augmentation experiments for portfolio construction")]
struct Cli {
    /// Flat `key = value` settings file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate GBM or Heston price paths to CSV.
    Simulate(commands::simulate::SimulateArgs),
    /// Write augmented copies of a price series.
    Augment(commands::augment::AugmentArgs),
    /// Train a position network on a price series.
    Train(commands::train::TrainArgs),
    /// Roll a strategy over held-out prices.
    Backtest(commands::backtest::BacktestArgs),
    /// Check closed-form utilities against Monte Carlo.
    Verify(commands::verify::VerifyArgs),
    /// Grid search for the augmentation strength.
    Metaopt(commands::metaopt::MetaoptArgs),
    /// Train and backtest every scheme across seeds.
    Pipeline(commands::pipeline::PipelineArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(cfg, a),
        Command::Augment(a) => commands::augment::run(cfg, a),
        Command::Train(a) => commands::train::run(cfg, a),
        Command::Backtest(a) => commands::backtest::run(cfg, a),
        Command::Verify(a) => commands::verify::run(cfg, a),
        Command::Metaopt(a) => commands::metaopt::run(cfg, a),
        Command::Pipeline(a) => commands::pipeline::run(cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
