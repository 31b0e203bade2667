use std::path::{Path, PathBuf};

use augport::dataio::load_price_csv;
use augport::experiment::{run_all, simulated_splits, split_series, summarize, PipelineConfig, PipelineReport};
use clap::Args;
use serde::Serialize;

use super::gbm_from;
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{num, write_csv, write_json};

#[derive(Args, Debug, Serialize)]
pub struct PipelineArgs {
    /// Price CSV split into train and test; simulated GBM paths when absent.
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
    pub train_len: Option<usize>,
    #[arg(long)]
    pub test_len: Option<usize>,
    #[arg(long)]
    pub lookback: Option<usize>,
    /// Hidden layer widths, e.g. `64,64`.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub minibatch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Multiplier on every scheme's estimated strength.
    #[arg(long)]
    pub strength_scale: Option<f64>,
    #[arg(long)]
    pub vol_window: Option<usize>,
    #[arg(long)]
    pub tau: Option<usize>,
    /// Positions in [0, 1] instead of [-1, 1].
    #[arg(long)]
    pub no_short: bool,
    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Comma-separated subset of none, weight-decay, additive, naive, proposed.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Unused by the pipeline itself; recorded in artifact banners.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of every position and wealth path.
    #[arg(long)]
    pub positions: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report {
    config: PipelineConfig,
    config_hash: String,
    seed: u64,
    #[serde(flatten)]
    report: PipelineReport,
}

pub fn run(config: Option<&Path>, args: PipelineArgs) -> CliResult<()> {
    let s = Settings::resolve("pipeline", config, &args)?;
    let d = PipelineConfig::default();
    let cfg = PipelineConfig {
        model: gbm_from(&s)?,
        train_len: s.or("train_len", d.train_len)?,
        test_len: s.or("test_len", d.test_len)?,
        lookback: s.or("lookback", d.lookback)?,
        hidden: s.list("hidden")?.unwrap_or(d.hidden),
        lambda: s.or("lambda", d.lambda)?,
        steps: s.or("steps", d.steps)?,
        minibatch: s.or("minibatch", d.minibatch)?,
        learning_rate: s.or("lr", d.learning_rate)?,
        weight_decay: s.or("weight_decay", d.weight_decay)?,
        strength_scale: s.or("strength_scale", d.strength_scale)?,
        vol_window: s.or("vol_window", d.vol_window)?,
        tau: s.or("tau", d.tau)?,
        no_short: s.flag("no_short")?,
        seeds: s.list("seeds")?.unwrap_or(d.seeds),
        schemes: s.list("schemes")?.unwrap_or(d.schemes),
    };
    let splits = match s.get::<PathBuf>("input")? {
        Some(path) => {
            let series = load_price_csv(&path, &s.or("column", "close".to_string())?)?;
            let split = split_series(&series, cfg.train_len, cfg.test_len, cfg.lookback)?;
            cfg.seeds.iter().map(|&seed| (seed, split.clone())).collect()
        }
        None => simulated_splits(&cfg)?,
    };
    let runs = run_all(&cfg, &splits)?;
    let report = summarize(&cfg, &runs)?;

    if let Some(path) = s.get::<PathBuf>("positions")? {
        let rows = runs.iter().flat_map(|run| {
            let traj = &run.outcome.trajectory;
            traj.positions.iter().zip(&traj.returns).enumerate().map(move |(t, (p, r))| {
                vec![
                    run.scheme.name().to_string(),
                    run.seed.to_string(),
                    (t + 1).to_string(),
                    num(*p),
                    num(*r),
                    num(traj.wealth[t + 1]),
                ]
            })
        });
        write_csv(
            Some(&path),
            &s.csv_banner()?,
            &["scheme", "seed", "t", "position", "return", "wealth"],
            rows,
        )?;
    }
    let out = Report {
        config: cfg,
        config_hash: s.hash(),
        seed: s.seed()?,
        report,
    };
    write_json(s.get::<PathBuf>("out")?.as_deref(), &out)
}
