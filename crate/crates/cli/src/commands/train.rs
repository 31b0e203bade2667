use std::path::{Path, PathBuf};

use augport::augment::{DEFAULT_SMOOTHING, DEFAULT_VOL_WINDOW};
use augport::experiment::{estimate_model, scheme_plan, PipelineConfig, PipelineScheme};
use augport::nntrain::{build_samples, train, AdamConfig, Head, MlpModel, NoisePlan, Objective, TrainConfig};
use augport::noise::NoiseSource;
use augport::stats::sample_sd;
use augport::Error;
use clap::Args;
use serde::Serialize;

use super::{load_or_simulate, usage};
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{num, write_csv, write_json};

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Training price CSV; a simulated GBM path when absent.
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
    /// Length of the simulated training path.
    #[arg(long)]
    pub train_len: Option<usize>,
    /// none, weight-decay, additive, naive or proposed.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Explicit `rho`, `rho0` or `c`; estimated from the data when absent.
    #[arg(long)]
    pub strength: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// regularized, full-three-term or sampled-aug.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub minibatch: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub lookback: Option<usize>,
    /// Hidden layer widths, e.g. `64,64`.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub vol_window: Option<usize>,
    #[arg(long)]
    pub tau: Option<usize>,
    /// Positions in [0, 1] instead of [-1, 1].
    #[arg(long)]
    pub no_short: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of the loss at every step.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainReport {
    config: std::collections::BTreeMap<String, String>,
    config_hash: String,
    seed: u64,
    scheme: String,
    plan: NoisePlan,
    weight_decay: f64,
    samples: usize,
    final_loss: f64,
    model_path: PathBuf,
}

pub fn run(config: Option<&Path>, args: TrainArgs) -> CliResult<()> {
    let s = Settings::resolve("train", config, &args)?;
    let defaults = PipelineConfig::default();
    let seed = s.seed()?;
    let out: PathBuf = s.require("out")?;
    let series = load_or_simulate(&s, s.or("train_len", defaults.train_len)?)?;
    let scheme: PipelineScheme = s.or("scheme", "proposed".to_string())?.parse()?;
    let lookback = s.or("lookback", defaults.lookback)?;
    let hidden = s.list::<usize>("hidden")?.unwrap_or(defaults.hidden.clone());
    let vol_window = s.or("vol_window", DEFAULT_VOL_WINDOW)?;
    let tau = s.or("tau", DEFAULT_SMOOTHING)?;
    let weight_decay_default = s.or("weight_decay", defaults.weight_decay)?;

    let (plan, weight_decay) = match (scheme, s.get::<f64>("strength")?) {
        (PipelineScheme::Additive, Some(rho)) => (NoisePlan::Additive { rho }, 0.0),
        (PipelineScheme::Naive, Some(rho0)) => (NoisePlan::Naive { rho0 }, 0.0),
        (PipelineScheme::Proposed, Some(c)) => (NoisePlan::Proposed { c, vol_window, tau }, 0.0),
        (PipelineScheme::None | PipelineScheme::WeightDecay, Some(_)) => {
            return Err(usage("--strength applies to additive, naive and proposed only"))
        }
        (scheme, None) => {
            let cfg = PipelineConfig {
                weight_decay: weight_decay_default,
                strength_scale: 1.0,
                vol_window,
                tau,
                ..defaults.clone()
            };
            scheme_plan(scheme, &series, &estimate_model(&series)?, &cfg)?
        }
    };

    let samples = build_samples(&series, lookback, &plan)?;
    let sd = sample_sd(series.returns().values());
    if !(sd > 0.0) {
        return Err(Error::ZeroVolatility.into());
    }
    let head = if s.flag("no_short")? {
        Head::Squash { lo: 0.0, hi: 1.0 }
    } else {
        Head::Squash { lo: -1.0, hi: 1.0 }
    };
    let mut sizes = vec![lookback];
    sizes.extend(&hidden);
    sizes.push(1);
    let root = NoiseSource::new(seed);
    let init = MlpModel::new(&sizes, head, &mut root.derive("init").stream(0))?.with_input_scale(1.0 / sd);
    let objective: Objective = s.or("objective", "regularized".to_string())?.parse()?;
    let tc = TrainConfig {
        lambda: s.or("lambda", defaults.lambda)?,
        objective,
        draws: s.or("draws", if objective == Objective::Regularized { 1 } else { 8 })?,
        minibatch: s.or("minibatch", defaults.minibatch)?,
        steps: s.or("steps", defaults.steps)?,
        adam: AdamConfig {
            learning_rate: s.or("lr", defaults.learning_rate)?,
            ..Default::default()
        },
        weight_decay,
        seed: root.derive("train").seed,
    };
    let outcome = train(init, &samples, &tc)?;
    outcome.model.save_json(&out)?;

    if let Some(trace) = s.get::<PathBuf>("trace")? {
        let rows = outcome
            .loss_trace
            .iter()
            .enumerate()
            .map(|(i, l)| vec![i.to_string(), num(*l)]);
        write_csv(Some(&trace), &s.csv_banner()?, &["step", "loss"], rows)?;
    }
    let report = TrainReport {
        config: s.values().clone(),
        config_hash: s.hash(),
        seed,
        scheme: scheme.name().to_string(),
        plan,
        weight_decay,
        samples: samples.len(),
        final_loss: *outcome.loss_trace.last().expect("at least one step"),
        model_path: out,
    };
    write_json(s.get::<PathBuf>("report")?.as_deref(), &report)
}
