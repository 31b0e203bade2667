use std::path::{Path, PathBuf};

use augport::backtest::{run_backtest, sharpe, MclPoint};
use augport::nntrain::MlpModel;
use augport::Error;
use clap::Args;
use serde::Serialize;

use super::{load_or_simulate, usage};
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{num, write_csv, write_json};

#[derive(Args, Debug, Serialize)]
pub struct BacktestArgs {
    /// Price CSV; a simulated GBM path when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// First price index to use; earlier prices are skipped.
    #[arg(long)]
    pub start: Option<usize>,
    /// `model`, `buy-and-hold` or `constant`.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Checkpoint for the `model` strategy.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Position for the `constant` strategy.
    #[arg(long)]
    pub position: Option<f64>,
    /// Returns fed to the rule; the model's input size by default.
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Wealth CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct BacktestReport {
    strategy: String,
    #[serde(rename = "T")]
    t: usize,
    /// `null` when every wealth return is equal.
    sharpe: Option<f64>,
    final_wealth: f64,
    bankruptcies: usize,
    mean_return: f64,
    risk: f64,
    positions_csv_path: Option<PathBuf>,
    config_hash: String,
    seed: u64,
}

pub fn run(config: Option<&Path>, args: BacktestArgs) -> CliResult<()> {
    let s = Settings::resolve("backtest", config, &args)?;
    let full = load_or_simulate(&s, s.or("steps", 400)?)?;
    let start: usize = s.or("start", 0)?;
    if start + 2 > full.len() {
        return Err(Error::SeriesTooShort {
            len: full.len(),
            required: start + 2,
        }
        .into());
    }
    let series = full.slice(start, full.len())?;
    let strategy: String = s.or("strategy", "model".to_string())?;

    let traj = match strategy.as_str() {
        "model" => {
            let model = MlpModel::load_json(s.require::<PathBuf>("model")?)?;
            let lookback = s.or("lookback", model.input_dim())?;
            run_backtest(|w| model.forward(w).unwrap_or(0.0), &series, lookback)?
        }
        "buy-and-hold" => run_backtest(|_| 1.0, &series, s.or("lookback", 0)?)?,
        "constant" => {
            let p: f64 = s.require("position")?;
            run_backtest(|_| p, &series, s.or("lookback", 0)?)?
        }
        other => {
            return Err(usage(format!(
                "unknown strategy `{other}`; expected model, buy-and-hold or constant"
            )))
        }
    };

    let sharpe = match sharpe(&traj) {
        Ok(v) => Some(v),
        Err(Error::ZeroDispersion) => None,
        Err(e) => return Err(e.into()),
    };
    let out = s.get::<PathBuf>("out")?;
    if let Some(path) = &out {
        let mut rows = vec![vec!["0".into(), String::new(), String::new(), num(1.0)]];
        for (i, (p, r)) in traj.positions.iter().zip(&traj.returns).enumerate() {
            rows.push(vec![(i + 1).to_string(), num(*p), num(*r), num(traj.wealth[i + 1])]);
        }
        write_csv(Some(path), &s.csv_banner()?, &["t", "position", "return", "wealth"], rows)?;
    }
    let point = MclPoint::from_trajectory(&traj, strategy.clone());
    let report = BacktestReport {
        strategy,
        t: traj.positions.len(),
        sharpe,
        final_wealth: traj.final_wealth(),
        bankruptcies: usize::from(traj.bankrupt),
        mean_return: point.mean_return,
        risk: point.risk,
        positions_csv_path: out,
        config_hash: s.hash(),
        seed: s.seed()?,
    };
    write_json(s.get::<PathBuf>("report")?.as_deref(), &report)
}
