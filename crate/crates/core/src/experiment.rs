//! End-to-end comparison of augmentation schemes: split a price series,
//! estimate the model, train one network per scheme and backtest each on
//! the held-out part.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{optimal_additive_variance, optimal_naive_variance, Strength, DEFAULT_SMOOTHING, DEFAULT_VOL_WINDOW};
use crate::backtest::{run_backtest, sharpe, WealthTrajectory};
use crate::dataio::PriceSeries;
use crate::error::{Error, Result};
use crate::nntrain::{build_samples, train, AdamConfig, Head, MlpModel, NoisePlan, Objective, TrainConfig};
use crate::noise::NoiseSource;
use crate::procgen::{simulate_gbm, GbmParams};
use crate::stats::{mean, sample_sd, standard_error};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineScheme {
    None,
    WeightDecay,
    Additive,
    Naive,
    Proposed,
}

impl PipelineScheme {
    pub const ALL: [PipelineScheme; 5] = [
        PipelineScheme::None,
        PipelineScheme::WeightDecay,
        PipelineScheme::Additive,
        PipelineScheme::Naive,
        PipelineScheme::Proposed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PipelineScheme::None => "none",
            PipelineScheme::WeightDecay => "weight-decay",
            PipelineScheme::Additive => "additive",
            PipelineScheme::Naive => "naive",
            PipelineScheme::Proposed => "proposed",
        }
    }
}

impl std::str::FromStr for PipelineScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Generating model for simulated runs.
    pub model: GbmParams,
    pub train_len: usize,
    pub test_len: usize,
    pub lookback: usize,
    pub hidden: Vec<usize>,
    pub lambda: f64,
    pub steps: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Multiplies every scheme's estimated optimal strength.
    pub strength_scale: f64,
    pub vol_window: usize,
    pub tau: usize,
    pub no_short: bool,
    pub seeds: Vec<u64>,
    pub schemes: Vec<PipelineScheme>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model: GbmParams {
                s0: 1.0,
                r: 0.005,
                sigma: 0.01,
            },
            train_len: 400,
            test_len: 400,
            lookback: 10,
            hidden: vec![64, 64],
            lambda: 40.0,
            steps: 4000,
            minibatch: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-3,
            strength_scale: 3.0,
            vol_window: DEFAULT_VOL_WINDOW,
            tau: DEFAULT_SMOOTHING,
            no_short: false,
            seeds: vec![0, 1, 2, 3, 4],
            schemes: PipelineScheme::ALL.to_vec(),
        }
    }
}

/// Per-scheme outcome across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: PipelineScheme,
    pub sharpe: Vec<f64>,
    pub mean_sharpe: f64,
    pub sharpe_se: f64,
    pub final_wealth: Vec<f64>,
    pub bankruptcies: usize,
    /// Positions were all equal, so the Sharpe ratio was recorded as zero.
    pub flat_runs: usize,
    pub mean_position: f64,
    pub position_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub results: Vec<SchemeResult>,
    /// Scheme names by decreasing mean Sharpe ratio.
    pub ranking: Vec<String>,
}

impl PipelineReport {
    pub fn result(&self, scheme: PipelineScheme) -> Option<&SchemeResult> {
        self.results.iter().find(|r| r.scheme == scheme)
    }
}

/// One train/test split: `train` holds `train_len + 1` prices, `test` starts
/// `lookback` returns before the split so the first decision sees only
/// training returns.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: PriceSeries,
    pub test: PriceSeries,
}

pub fn split_series(series: &PriceSeries, train_len: usize, test_len: usize, lookback: usize) -> Result<Split> {
    let needed = train_len + test_len + 1;
    if series.len() < needed || train_len <= lookback {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            required: needed.max(lookback + 2),
        });
    }
    Ok(Split {
        train: series.slice(0, train_len + 1)?,
        test: series.slice(train_len - lookback, train_len + test_len + 1)?,
    })
}

/// Drift and volatility estimated from the training returns.
pub fn estimate_model(train: &PriceSeries) -> Result<GbmParams> {
    let r = train.returns();
    let est = GbmParams {
        s0: train.prices()[0],
        r: mean(r.values()),
        sigma: sample_sd(r.values()),
    };
    est.validate()?;
    if !(est.r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "estimated drift {} is not positive; optimal strengths are undefined",
            est.r
        )));
    }
    if est.sigma == 0.0 {
        return Err(Error::ZeroVolatility);
    }
    Ok(est)
}

/// The noise plan and weight decay a scheme trains with.
pub fn scheme_plan(scheme: PipelineScheme, train: &PriceSeries, est: &GbmParams, cfg: &PipelineConfig) -> Result<(NoisePlan, f64)> {
    let k = cfg.strength_scale;
    let finite = |s: Strength| {
        s.finite()
            .ok_or_else(|| Error::InvalidParameter("training series prescribes unbounded strength".into()))
    };
    Ok(match scheme {
        PipelineScheme::None => (NoisePlan::None, 0.0),
        PipelineScheme::WeightDecay => (NoisePlan::None, cfg.weight_decay),
        PipelineScheme::Additive => (
            NoisePlan::Additive {
                rho: k * finite(optimal_additive_variance(train, est)?)?.sqrt(),
            },
            0.0,
        ),
        PipelineScheme::Naive => (
            NoisePlan::Naive {
                rho0: k * finite(optimal_naive_variance(train, est)?)?.sqrt(),
            },
            0.0,
        ),
        // c^2 vol^2 |r| matches sigma^2 r_t / (2r) when c^2 = 1 / (2r)
        PipelineScheme::Proposed => (
            NoisePlan::Proposed {
                c: k * (1.0 / (2.0 * est.r)).sqrt(),
                vol_window: cfg.vol_window,
                tau: cfg.tau,
            },
            0.0,
        ),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub trajectory: WealthTrajectory,
    pub model: MlpModel,
    pub loss_trace: Vec<f64>,
}

/// Train one scheme on `split.train` and backtest it on `split.test`.
pub fn run_scheme(scheme: PipelineScheme, split: &Split, cfg: &PipelineConfig, seed: u64) -> Result<RunOutcome> {
    let est = estimate_model(&split.train)?;
    let (plan, weight_decay) = scheme_plan(scheme, &split.train, &est, cfg)?;
    let samples = build_samples(&split.train, cfg.lookback, &plan)?;
    let head = if cfg.no_short {
        Head::Squash { lo: 0.0, hi: 1.0 }
    } else {
        Head::Squash { lo: -1.0, hi: 1.0 }
    };
    let mut sizes = vec![cfg.lookback];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let root = NoiseSource::new(seed);
    // same initial weights for every scheme
    let init = MlpModel::new(&sizes, head, &mut root.derive("init").stream(0))?.with_input_scale(1.0 / est.sigma);
    let tc = TrainConfig {
        lambda: cfg.lambda,
        objective: Objective::Regularized,
        draws: 1,
        minibatch: cfg.minibatch,
        steps: cfg.steps,
        adam: AdamConfig {
            learning_rate: cfg.learning_rate,
            ..Default::default()
        },
        weight_decay,
        seed: root.derive("train").seed,
    };
    let out = train(init, &samples, &tc)?;
    let model = out.model;
    let trajectory = run_backtest(|w| model.forward(w).unwrap_or(0.0), &split.test, cfg.lookback)?;
    Ok(RunOutcome {
        trajectory,
        model,
        loss_trace: out.loss_trace,
    })
}

/// Simulated GBM splits, one per seed.
pub fn simulated_splits(cfg: &PipelineConfig) -> Result<Vec<(u64, Split)>> {
    cfg.seeds
        .iter()
        .map(|&seed| {
            let noise = NoiseSource::new(seed).derive("prices");
            let series = simulate_gbm(&cfg.model, cfg.train_len + cfg.test_len, &mut noise.stream(0))?;
            Ok((seed, split_series(&series, cfg.train_len, cfg.test_len, cfg.lookback)?))
        })
        .collect()
}

/// One trained-and-backtested run.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineRun {
    pub scheme: PipelineScheme,
    pub seed: u64,
    pub outcome: RunOutcome,
}

/// Every configured scheme on every split, in scheme-major order.
pub fn run_all(cfg: &PipelineConfig, splits: &[(u64, Split)]) -> Result<Vec<PipelineRun>> {
    if splits.is_empty() {
        return Err(Error::InvalidParameter("no seeds to run".into()));
    }
    let jobs: Vec<(PipelineScheme, usize)> = cfg
        .schemes
        .iter()
        .flat_map(|s| (0..splits.len()).map(move |i| (*s, i)))
        .collect();
    jobs.par_iter()
        .map(|&(scheme, i)| {
            let (seed, split) = &splits[i];
            Ok(PipelineRun {
                scheme,
                seed: *seed,
                outcome: run_scheme(scheme, split, cfg, *seed)?,
            })
        })
        .collect()
}

/// Every configured scheme on every split, summarized.
pub fn run_pipeline(cfg: &PipelineConfig, splits: &[(u64, Split)]) -> Result<PipelineReport> {
    summarize(cfg, &run_all(cfg, splits)?)
}

/// Per-scheme Sharpe statistics and the ranking by mean Sharpe.
pub fn summarize(cfg: &PipelineConfig, all: &[PipelineRun]) -> Result<PipelineReport> {
    let mut results = Vec::new();
    for scheme in &cfg.schemes {
        let runs: Vec<&RunOutcome> = all.iter().filter(|r| r.scheme == *scheme).map(|r| &r.outcome).collect();
        let mut flat_runs = 0;
        let sharpes: Vec<f64> = runs
            .iter()
            .map(|o| match sharpe(&o.trajectory) {
                Ok(s) => Ok(s),
                Err(Error::ZeroDispersion) => {
                    flat_runs += 1;
                    Ok(0.0)
                }
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        let positions: Vec<f64> = runs.iter().flat_map(|o| o.trajectory.positions.iter().copied()).collect();
        results.push(SchemeResult {
            scheme: *scheme,
            mean_sharpe: mean(&sharpes),
            sharpe_se: standard_error(&sharpes),
            sharpe: sharpes,
            final_wealth: runs.iter().map(|o| o.trajectory.final_wealth()).collect(),
            bankruptcies: runs.iter().filter(|o| o.trajectory.bankrupt).count(),
            flat_runs,
            mean_position: mean(&positions),
            position_sd: sample_sd(&positions),
        });
    }
    let mut order: Vec<&SchemeResult> = results.iter().collect();
    order.sort_by(|a, b| b.mean_sharpe.total_cmp(&a.mean_sharpe));
    let ranking = order.iter().map(|r| r.scheme.name().to_string()).collect();
    Ok(PipelineReport { results, ranking })
}
