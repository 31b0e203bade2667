//! Learning a position rule `pi = f(past returns)` with a small network
//! trained on augmented utility objectives.

pub mod adam;
pub mod model;
pub mod objective;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{estimate_volatility, smooth_abs_returns, Strength, DEFAULT_SMOOTHING, DEFAULT_VOL_WINDOW};
use crate::dataio::{PriceSeries, WindowDataset};
use crate::error::{Error, Result};
use crate::noise::NoiseSource;

pub use adam::{Adam, AdamConfig};
pub use model::{Head, MlpModel};
pub use objective::{loss, loss_and_grad, loss_terms, BatchNoise, LossTerms, Objective, TrainSample};

pub const DEFAULT_SIZES: [usize; 4] = [10, 64, 64, 1];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub objective: Objective,
    /// Noise draws per sample and step.
    pub draws: usize,
    pub minibatch: usize,
    pub steps: usize,
    pub adam: AdamConfig,
    /// L2 penalty `weight_decay / 2 * |w|^2` on weights (not biases).
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            objective: Objective::Regularized,
            draws: 1,
            minibatch: 64,
            steps: 1000,
            adam: AdamConfig::default(),
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate >= 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be finite and >= 0".into()));
        }
        if self.steps == 0 || self.minibatch == 0 || self.draws == 0 {
            return Err(Error::InvalidParameter("steps, minibatch and draws must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter("lambda and weight decay must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Minibatch loss at every step, before the update.
    pub loss_trace: Vec<f64>,
}

/// Minibatch Adam on `samples`. Each epoch visits a fresh permutation;
/// batches never straddle epochs.
pub fn train(mut model: MlpModel, samples: &[TrainSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let root = NoiseSource::new(config.seed);
    let mut order_rng = root.derive("minibatch").stream(0);
    let aug = root.derive("augment");
    let mask = model.weight_mask();
    let mut adam = Adam::new(config.adam, model.params().len());
    let mut grad = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = samples.len();
    let mut loss_trace = Vec::with_capacity(config.steps);
    let batch_len = config.minibatch.min(samples.len());
    let mut batch = Vec::with_capacity(batch_len);

    for step in 0..config.steps {
        if cursor + batch_len > order.len() {
            order.shuffle(order_rng.rng());
            cursor = 0;
        }
        batch.clear();
        batch.extend(order[cursor..cursor + batch_len].iter().map(|&i| samples[i].clone()));
        cursor += batch_len;

        let noise = BatchNoise::draw(&batch, config.draws, &mut aug.stream(step as u64));
        let mut loss = loss_and_grad(&model, &batch, &noise, config.objective, config.lambda, &mut grad)?;
        if config.weight_decay > 0.0 {
            for ((g, p), is_w) in grad.iter_mut().zip(model.params()).zip(&mask) {
                if *is_w {
                    *g += config.weight_decay * p;
                    loss += 0.5 * config.weight_decay * p * p;
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, loss });
        }
        loss_trace.push(loss);
        adam.step(model.params_mut(), &grad);
    }
    Ok(TrainOutcome { model, loss_trace })
}

/// Per-sample noise variances in return units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoisePlan {
    None,
    /// Price noise `rho`: variance `rho^2 / S^2` on each return.
    Additive { rho: f64 },
    /// Variance `rho0^2` on each return.
    Naive { rho0: f64 },
    /// Variance `c^2 vol^2 |r|`; the target uses the smoothed `|r|`.
    Proposed { c: f64, vol_window: usize, tau: usize },
    /// Target variance `gamma_t^2 / S_t^2` from per-step price-space
    /// strengths; unbounded steps are dropped. Inputs stay clean.
    Theory { gamma_sq: Vec<Strength> },
}

impl NoisePlan {
    pub fn proposed(c: f64) -> Self {
        NoisePlan::Proposed {
            c,
            vol_window: DEFAULT_VOL_WINDOW,
            tau: DEFAULT_SMOOTHING,
        }
    }
}

/// Return-space samples with `lookback` inputs from `series`, with noise
/// variances from `plan`.
pub fn build_samples(series: &PriceSeries, lookback: usize, plan: &NoisePlan) -> Result<Vec<TrainSample>> {
    let returns = series.returns();
    let r = returns.values();
    let s = series.prices();
    let ds = WindowDataset::from_returns(&returns, lookback)?;

    let (per_return, target_var): (Vec<f64>, Vec<f64>) = match plan {
        NoisePlan::None => (vec![0.0; r.len()], vec![0.0; r.len()]),
        NoisePlan::Additive { rho } => {
            let v: Vec<f64> = s[..r.len()].iter().map(|p| rho * rho / (p * p)).collect();
            (v.clone(), v)
        }
        NoisePlan::Naive { rho0 } => (vec![rho0 * rho0; r.len()], vec![rho0 * rho0; r.len()]),
        NoisePlan::Proposed { c, vol_window, tau } => {
            let vol = estimate_volatility(&returns, *vol_window)?;
            let smooth = smooth_abs_returns(&returns, *tau)?;
            let c2 = c * c;
            let sig2 = |i: usize| vol.sigma_hat[i] * vol.sigma_hat[i];
            (
                (0..r.len()).map(|i| c2 * sig2(i) * r[i].abs()).collect(),
                (0..r.len()).map(|i| c2 * sig2(i) * smooth[i]).collect(),
            )
        }
        NoisePlan::Theory { gamma_sq } => {
            if gamma_sq.len() != r.len() {
                return Err(Error::LengthMismatch {
                    left: gamma_sq.len(),
                    right: r.len(),
                });
            }
            let tv = gamma_sq
                .iter()
                .zip(s)
                .map(|(g, p)| g.finite().map_or(0.0, |v| v / (p * p)))
                .collect();
            (vec![0.0; r.len()], tv)
        }
    };

    Ok(ds
        .windows
        .into_iter()
        .map(|w| {
            let t = w.target_index;
            let weight = match plan {
                NoisePlan::Theory { gamma_sq } if gamma_sq[t].is_unbounded() => 0.0,
                _ => 1.0,
            };
            TrainSample {
                input_var: per_return[t - lookback..t].to_vec(),
                input: w.input,
                target: w.target,
                target_var: target_var[t],
                weight,
            }
        })
        .collect())
}

/// Model outputs on clean inputs.
pub fn predict(model: &MlpModel, samples: &[TrainSample]) -> Result<Vec<f64>> {
    samples.iter().map(|s| model.forward(&s.input)).collect()
}
