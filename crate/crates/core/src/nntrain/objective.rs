//! Training losses: the output-regularized objective, its three-term
//! refinement, and the direct sampled estimate of the augmented utility.

use serde::{Deserialize, Serialize};

use super::model::MlpModel;
use crate::error::{Error, Result};
use crate::noise::NoiseStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Gain on noisy inputs minus `lambda v pi^2`.
    Regularized,
    /// [`Objective::Regularized`] plus `lambda r^2 Var[pi]` over input draws.
    FullThreeTerm,
    /// `mean G - lambda Var G` with the target return perturbed as well.
    SampledAug,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regularized" => Ok(Objective::Regularized),
            "full" | "full-three-term" => Ok(Objective::FullThreeTerm),
            "sampled" | "sampled-aug" => Ok(Objective::SampledAug),
            other => Err(Error::InvalidParameter(format!("unknown objective `{other}`"))),
        }
    }
}

/// One window of past returns, the next return, and the noise variances
/// attached to each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    pub input: Vec<f64>,
    pub target: f64,
    pub input_var: Vec<f64>,
    pub target_var: f64,
    /// Relative weight in the batch mean; zero drops the sample.
    pub weight: f64,
}

impl TrainSample {
    pub fn plain(input: Vec<f64>, target: f64) -> Self {
        let n = input.len();
        Self {
            input,
            target,
            input_var: vec![0.0; n],
            target_var: 0.0,
            weight: 1.0,
        }
    }
}

/// Pre-drawn unit noise for a batch, so a loss and its gradient can be
/// evaluated repeatedly on identical draws.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNoise {
    pub draws: usize,
    /// `input[k][j]` is the input noise vector of draw `j` of sample `k`.
    input: Vec<Vec<Vec<f64>>>,
    /// `target[k][j]`
    target: Vec<Vec<f64>>,
}

impl BatchNoise {
    pub fn draw(batch: &[TrainSample], draws: usize, noise: &mut NoiseStream) -> Self {
        let input = batch
            .iter()
            .map(|s| (0..draws).map(|_| noise.draw(s.input.len())).collect())
            .collect();
        let target = batch.iter().map(|_| noise.draw(draws)).collect();
        Self { draws, input, target }
    }

    pub fn zeros(batch: &[TrainSample], draws: usize) -> Self {
        Self {
            draws,
            input: batch.iter().map(|s| vec![vec![0.0; s.input.len()]; draws]).collect(),
            target: vec![vec![0.0; draws]; batch.len()],
        }
    }
}

/// Every term of the objectives on one batch, each a weighted batch mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    /// `r mean_j pi_j`
    pub gain: f64,
    /// `lambda r^2 Var_j[pi_j]`
    pub risk_past: f64,
    /// `lambda v mean_j pi_j^2`
    pub risk_future: f64,
    /// `mean_j G_j` with a perturbed target
    pub sampled_gain: f64,
    /// `lambda Var_j[G_j]`
    pub sampled_risk: f64,
    /// Standard error of `sampled_risk` over the draws.
    pub sampled_risk_se: f64,
}

impl LossTerms {
    pub fn loss(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Regularized => -(self.gain - self.risk_future),
            Objective::FullThreeTerm => -(self.gain - self.risk_past - self.risk_future),
            Objective::SampledAug => -(self.sampled_gain - self.sampled_risk),
        }
    }
}

fn check_batch(model: &MlpModel, batch: &[TrainSample], noise: &BatchNoise, objective: Objective) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if noise.target.len() != batch.len() {
        return Err(Error::LengthMismatch {
            left: noise.target.len(),
            right: batch.len(),
        });
    }
    if noise.draws == 0 || (objective != Objective::Regularized && noise.draws < 2) {
        return Err(Error::InvalidParameter(format!(
            "{objective:?} needs more noise draws than {}",
            noise.draws
        )));
    }
    for s in batch {
        if s.input_var.len() != s.input.len() {
            return Err(Error::LengthMismatch {
                left: s.input_var.len(),
                right: s.input.len(),
            });
        }
        if model.input_dim() != 0 && s.input.len() != model.input_dim() {
            return Err(Error::SizeMismatch {
                expected: model.input_dim(),
                found: s.input.len(),
            });
        }
    }
    let total: f64 = batch.iter().map(|s| s.weight).sum();
    if !(total > 0.0) {
        return Err(Error::EmptyBatch);
    }
    Ok(total)
}

fn noisy_input(s: &TrainSample, eps: &[f64]) -> Vec<f64> {
    s.input
        .iter()
        .zip(&s.input_var)
        .zip(eps)
        .map(|((x, v), e)| x + v.sqrt() * e)
        .collect()
}

/// Outputs `pi[k][j]` for every sample and draw.
fn outputs(model: &MlpModel, batch: &[TrainSample], noise: &BatchNoise) -> Result<Vec<Vec<f64>>> {
    batch
        .iter()
        .zip(&noise.input)
        .map(|(s, draws)| draws.iter().map(|eps| model.forward(&noisy_input(s, eps))).collect())
        .collect()
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var)
}

pub fn loss_terms(
    model: &MlpModel,
    batch: &[TrainSample],
    noise: &BatchNoise,
    lambda: f64,
) -> Result<LossTerms> {
    let total = check_batch(model, batch, noise, Objective::Regularized)?;
    let pis = outputs(model, batch, noise)?;
    let mut t = LossTerms {
        gain: 0.0,
        risk_past: 0.0,
        risk_future: 0.0,
        sampled_gain: 0.0,
        sampled_risk: 0.0,
        sampled_risk_se: 0.0,
    };
    let mut se2 = 0.0;
    for ((s, pi), eta) in batch.iter().zip(&pis).zip(&noise.target) {
        let w = s.weight / total;
        if w == 0.0 {
            continue;
        }
        let m = pi.len() as f64;
        let (pi_mean, pi_var) = moments(pi);
        let pi_sq = pi.iter().map(|p| p * p).sum::<f64>() / m;
        let g: Vec<f64> = pi
            .iter()
            .zip(eta)
            .map(|(p, e)| p * (s.target + s.target_var.sqrt() * e))
            .collect();
        let (g_mean, g_var) = moments(&g);
        t.gain += w * s.target * pi_mean;
        t.risk_past += w * lambda * s.target * s.target * pi_var;
        t.risk_future += w * lambda * s.target_var * pi_sq;
        t.sampled_gain += w * g_mean;
        t.sampled_risk += w * lambda * g_var;
        if g.len() > 1 {
            // large-sample variance of the sample variance: (mu4 - s^4) / m
            let mu4 = g.iter().map(|x| (x - g_mean).powi(4)).sum::<f64>() / m;
            se2 += (w * lambda).powi(2) * (mu4 - g_var * g_var).max(0.0) / m;
        }
    }
    t.sampled_risk_se = se2.sqrt();
    Ok(t)
}

pub fn loss(model: &MlpModel, batch: &[TrainSample], noise: &BatchNoise, objective: Objective, lambda: f64) -> Result<f64> {
    check_batch(model, batch, noise, objective)?;
    Ok(loss_terms(model, batch, noise, lambda)?.loss(objective))
}

/// Loss and its gradient with respect to the model parameters, written into `grad`.
pub fn loss_and_grad(
    model: &MlpModel,
    batch: &[TrainSample],
    noise: &BatchNoise,
    objective: Objective,
    lambda: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let total = check_batch(model, batch, noise, objective)?;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let pis = outputs(model, batch, noise)?;
    let mut utility = 0.0;
    for (k, s) in batch.iter().enumerate() {
        let w = s.weight / total;
        if w == 0.0 {
            continue;
        }
        let pi = &pis[k];
        let m = pi.len() as f64;
        let r = s.target;
        let v = s.target_var;
        // dU_k / dpi_j
        let mut d = vec![0.0; pi.len()];
        match objective {
            Objective::Regularized | Objective::FullThreeTerm => {
                let (pi_mean, pi_var) = moments(pi);
                let pi_sq = pi.iter().map(|p| p * p).sum::<f64>() / m;
                utility += w * (r * pi_mean - lambda * v * pi_sq);
                for (dj, p) in d.iter_mut().zip(pi) {
                    *dj = r / m - 2.0 * lambda * v * p / m;
                }
                if objective == Objective::FullThreeTerm {
                    utility -= w * lambda * r * r * pi_var;
                    for (dj, p) in d.iter_mut().zip(pi) {
                        *dj -= lambda * r * r * 2.0 * (p - pi_mean) / (m - 1.0);
                    }
                }
            }
            Objective::SampledAug => {
                let y: Vec<f64> = noise.target[k].iter().map(|e| r + v.sqrt() * e).collect();
                let g: Vec<f64> = pi.iter().zip(&y).map(|(p, y)| p * y).collect();
                let (g_mean, g_var) = moments(&g);
                utility += w * (g_mean - lambda * g_var);
                for ((dj, gj), yj) in d.iter_mut().zip(&g).zip(&y) {
                    *dj = yj / m - lambda * 2.0 * (gj - g_mean) / (m - 1.0) * yj;
                }
            }
        }
        for (eps, dj) in noise.input[k].iter().zip(&d) {
            if *dj != 0.0 {
                model.forward_backward(&noisy_input(s, eps), -w * dj, grad)?;
            }
        }
    }
    Ok(-utility)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nntrain::model::Head;
    use crate::noise::NoiseSource;

    fn batch(n: usize, seed: u64) -> Vec<TrainSample> {
        let mut st = NoiseSource::new(seed).stream(0);
        (0..n)
            .map(|_| {
                let input: Vec<f64> = st.draw(4).iter().map(|x| 0.005 + 0.01 * x).collect();
                let target = 0.005 + 0.01 * st.next_value();
                TrainSample {
                    input_var: input.iter().map(|x| 0.5 * 1e-4 * x.abs()).collect(),
                    target_var: 0.5 * 1e-4 * target.abs(),
                    input,
                    target,
                    weight: 1.0,
                }
            })
            .collect()
    }

    #[test]
    fn zero_strength_zero_lambda_is_pure_gain() {
        let b: Vec<TrainSample> = batch(8, 1)
            .into_iter()
            .map(|s| TrainSample::plain(s.input, s.target))
            .collect();
        let m = MlpModel::new(&[4, 6, 1], Head::Identity, &mut NoiseSource::new(2).stream(0)).unwrap();
        let noise = BatchNoise::zeros(&b, 1);
        let l = loss(&m, &b, &noise, Objective::Regularized, 0.0).unwrap();
        let want = -b.iter().map(|s| m.forward(&s.input).unwrap() * s.target).sum::<f64>() / 8.0;
        assert!((l - want).abs() < 1e-15);
    }

    #[test]
    fn zero_model_has_zero_loss() {
        let b = batch(8, 3);
        let m = MlpModel::zeros(&[4, 6, 1], Head::Identity).unwrap();
        let noise = BatchNoise::draw(&b, 4, &mut NoiseSource::new(1).stream(0));
        for obj in [Objective::Regularized, Objective::FullThreeTerm, Objective::SampledAug] {
            assert_eq!(loss(&m, &b, &noise, obj, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn errors() {
        let m = MlpModel::zeros(&[4, 1], Head::Identity).unwrap();
        assert!(matches!(
            loss(&m, &[], &BatchNoise::zeros(&[], 1), Objective::Regularized, 1.0),
            Err(Error::EmptyBatch)
        ));
        let b = batch(2, 1);
        assert!(loss(&m, &b, &BatchNoise::zeros(&b, 1), Objective::SampledAug, 1.0).is_err());
    }

    #[test]
    fn gradient_matches_loss_value() {
        let b = batch(6, 5);
        let m = MlpModel::new(&[4, 5, 1], Head::Identity, &mut NoiseSource::new(7).stream(0)).unwrap();
        let noise = BatchNoise::draw(&b, 3, &mut NoiseSource::new(8).stream(0));
        let mut g = vec![0.0; m.params().len()];
        for obj in [Objective::Regularized, Objective::FullThreeTerm, Objective::SampledAug] {
            let l = loss_and_grad(&m, &b, &noise, obj, 1.5, &mut g).unwrap();
            assert!((l - loss(&m, &b, &noise, obj, 1.5).unwrap()).abs() < 1e-15);
        }
    }
}
