//! Mean-variance utilities: the training (augmented) utility, the true
//! utility under GBM, its closed forms, and Monte Carlo estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_prices, noisified_returns, AugmentationScheme, SchemeKind, VolEstimate};
use crate::dataio::PriceSeries;
use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::portfolio::{check_lambda, Portfolio};
use crate::procgen::{simulate_gbm, GbmParams};
use crate::stats::{mean, normal_cdf, sample_variance, standard_error};

/// A utility value split into its gain and risk parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub value: f64,
    pub gain_term: f64,
    pub risk_term: f64,
    /// Monte Carlo standard error of `value`; zero for exact values.
    pub se: f64,
}

impl UtilityReport {
    pub fn new(gain_term: f64, risk_term: f64, se: f64) -> Self {
        Self {
            value: gain_term - risk_term,
            gain_term,
            risk_term,
            se,
        }
    }

    pub fn exact(gain_term: f64, risk_term: f64) -> Self {
        Self::new(gain_term, risk_term, 0.0)
    }
}

/// Training utility `(1/T) sum_t E[G_t] - lambda Var[G_t]` over the
/// augmentation distribution, estimated with `n_draws` augmented copies of
/// `series`. With no augmentation the variance is exactly zero.
pub fn empirical_utility(
    portfolio: &Portfolio,
    series: &PriceSeries,
    scheme: &AugmentationScheme,
    vol: Option<&VolEstimate>,
    lambda: f64,
    n_draws: usize,
    noise: &NoiseSource,
) -> Result<UtilityReport> {
    check_lambda(lambda)?;
    let returns = series.returns();
    let r = returns.values();
    let t = r.len();
    if portfolio.len() != t {
        return Err(Error::LengthMismatch {
            left: portfolio.len(),
            right: t,
        });
    }
    let pi = &portfolio.weights;
    if scheme.kind == SchemeKind::None {
        let gain = pi.iter().zip(r).map(|(p, r)| p * r).sum::<f64>() / t as f64;
        return Ok(UtilityReport::exact(gain, 0.0));
    }
    if n_draws < 2 {
        return Err(Error::InvalidParameter("augmented utility needs at least 2 draws".into()));
    }

    let draws: Vec<Vec<f64>> = (0..n_draws as u64)
        .into_par_iter()
        .map(|k| {
            let z = augment_prices(series, scheme, vol, &mut noise.stream(k))?;
            let rt = noisified_returns(&z, series)?;
            Ok(rt.iter().zip(pi).map(|(r, p)| p * r).collect())
        })
        .collect::<Result<_>>()?;

    let mut gain = 0.0;
    let mut risk = 0.0;
    let mut column = vec![0.0; n_draws];
    for step in 0..t {
        for (c, d) in column.iter_mut().zip(&draws) {
            *c = d[step];
        }
        gain += mean(&column);
        risk += lambda * sample_variance(&column);
    }
    let per_draw_gain: Vec<f64> = draws.iter().map(|d| d.iter().sum::<f64>() / t as f64).collect();
    Ok(UtilityReport::new(
        gain / t as f64,
        risk / t as f64,
        standard_error(&per_draw_gain),
    ))
}

/// True in-sample utility of fixed positions when returns are i.i.d.
/// `N(r, sigma^2)`: `(r/T) sum pi_t - (lambda sigma^2 / 2T) sum pi_t^2`.
pub fn inner_true_utility(weights: &[f64], model: &GbmParams, lambda: f64) -> UtilityReport {
    let t = weights.len() as f64;
    if weights.iter().any(|w| !w.is_finite()) {
        return UtilityReport {
            value: f64::NEG_INFINITY,
            gain_term: f64::NAN,
            risk_term: f64::INFINITY,
            se: 0.0,
        };
    }
    let gain = model.r * weights.iter().sum::<f64>() / t;
    let risk = lambda * model.sigma * model.sigma / 2.0 * weights.iter().map(|w| w * w).sum::<f64>() / t;
    UtilityReport::exact(gain, risk)
}

fn check_closed_form(model: &GbmParams, lambda: f64) -> Result<()> {
    check_lambda(lambda)?;
    model.validate()?;
    if model.sigma == 0.0 {
        return Err(Error::ZeroVolatility);
    }
    Ok(())
}

/// Expected true utility of the sign strategy:
/// `[1 - 2 Phi(-r/sigma)] r - lambda sigma^2 / 2`.
pub fn true_utility_no_aug(model: &GbmParams, lambda: f64) -> Result<UtilityReport> {
    check_closed_form(model, lambda)?;
    let gain = (1.0 - 2.0 * normal_cdf(-model.r / model.sigma)) * model.r;
    Ok(UtilityReport::exact(gain, lambda * model.sigma * model.sigma / 2.0))
}

/// Expected true utility of the optimally augmented proposed scheme:
/// `r^2 / (2 lambda sigma^2) * Phi(r/sigma)`.
pub fn true_utility_proposed(model: &GbmParams, lambda: f64) -> Result<UtilityReport> {
    check_closed_form(model, lambda)?;
    let (r, s2) = (model.r, model.sigma * model.sigma);
    let p = normal_cdf(r / model.sigma);
    // gain r^2/(l s2) p, risk r^2/(2 l s2) p
    Ok(UtilityReport::exact(r * r / (lambda * s2) * p, r * r / (2.0 * lambda * s2) * p))
}

/// `(sum a_t)^2 / sum a_t^2 * H(sum a_t)` with `a_t = r_t S_t^2`; zero when
/// the series has no positive weighted drift.
pub fn additive_bracket(series: &PriceSeries) -> f64 {
    let (mut first, mut second) = (0.0, 0.0);
    for (r, s) in series.returns().values().iter().zip(series.prices()) {
        let a = r * s * s;
        first += a;
        second += a * a;
    }
    if first > 0.0 {
        first * first / second
    } else {
        0.0
    }
}

/// True utility of the optimally tuned additive scheme for one training set:
/// `r^2 / (2 lambda sigma^2 T) * bracket`.
pub fn additive_utility_given(series: &PriceSeries, model: &GbmParams, lambda: f64) -> Result<f64> {
    check_closed_form(model, lambda)?;
    let t = (series.len() - 1) as f64;
    Ok(model.r * model.r / (2.0 * lambda * model.sigma * model.sigma * t) * additive_bracket(series))
}

/// How the outer test expectation is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestEvaluation {
    /// The closed-form inner utility for i.i.d. normal returns.
    Exact,
    /// Simulated test trajectories per training set.
    Sampled(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub steps: usize,
    pub n_train_sets: usize,
    pub test: TestEvaluation,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            steps: 400,
            n_train_sets: 2000,
            test: TestEvaluation::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub report: UtilityReport,
    /// Utility for each training set, in set order.
    pub per_set: Vec<f64>,
}

/// Training set `i` of a Monte Carlo run; shared by every strategy evaluated
/// with the same `noise`, which gives common random numbers.
pub fn training_set(model: &GbmParams, steps: usize, noise: &NoiseSource, i: usize) -> Result<PriceSeries> {
    simulate_gbm(model, steps, &mut noise.derive("train").stream(i as u64))
}

/// Monte Carlo estimate of the expected true utility of a strategy. The
/// builder maps a training trajectory to its per-step positions.
pub fn true_utility_mc<F>(builder: F, model: &GbmParams, lambda: f64, config: &McConfig, noise: &NoiseSource) -> Result<McEstimate>
where
    F: Fn(&PriceSeries) -> Result<Vec<f64>> + Sync,
{
    check_lambda(lambda)?;
    if config.n_train_sets == 0 {
        return Err(Error::InvalidParameter("need at least one training set".into()));
    }
    let parts: Vec<(f64, f64)> = (0..config.n_train_sets)
        .into_par_iter()
        .map(|i| {
            let train = training_set(model, config.steps, noise, i)?;
            let weights = builder(&train)?;
            if weights.len() != config.steps {
                return Err(Error::LengthMismatch {
                    left: weights.len(),
                    right: config.steps,
                });
            }
            match config.test {
                TestEvaluation::Exact => {
                    let u = inner_true_utility(&weights, model, lambda);
                    Ok((u.gain_term, u.risk_term))
                }
                TestEvaluation::Sampled(n) => sampled_test_utility(&weights, model, lambda, n, &noise.derive(&format!("test-{i}"))),
            }
        })
        .collect::<Result<_>>()?;
    let per_set: Vec<f64> = parts.iter().map(|(g, r)| g - r).collect();
    let gains: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let risks: Vec<f64> = parts.iter().map(|p| p.1).collect();
    let report = UtilityReport::new(mean(&gains), mean(&risks), standard_error(&per_set));
    Ok(McEstimate { report, per_set })
}

/// `(1/T) sum_t mean_j G_tj - (lambda/2)(1/T) sum_t var_j G_tj` over `n`
/// independent test trajectories.
fn sampled_test_utility(weights: &[f64], model: &GbmParams, lambda: f64, n: usize, noise: &NoiseSource) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidParameter("sampled test evaluation needs at least 2 paths".into()));
    }
    let t = weights.len();
    let paths: Vec<Vec<f64>> = (0..n as u64)
        .map(|j| simulate_gbm(model, t, &mut noise.stream(j)).map(|p| p.returns().values().to_vec()))
        .collect::<Result<_>>()?;
    let mut gain = 0.0;
    let mut risk = 0.0;
    let mut column = vec![0.0; n];
    for (step, w) in weights.iter().enumerate() {
        for (c, p) in column.iter_mut().zip(&paths) {
            *c = w * p[step];
        }
        gain += mean(&column);
        risk += lambda / 2.0 * sample_variance(&column);
    }
    Ok((gain / t as f64, risk / t as f64))
}

/// Monte Carlo estimate of the tuned additive scheme's expected true utility
/// (the expectation of [`additive_utility_given`] over training sets).
pub fn true_utility_additive_mc(model: &GbmParams, lambda: f64, config: &McConfig, noise: &NoiseSource) -> Result<McEstimate> {
    check_closed_form(model, lambda)?;
    let per_set: Vec<f64> = (0..config.n_train_sets)
        .into_par_iter()
        .map(|i| additive_utility_given(&training_set(model, config.steps, noise, i)?, model, lambda))
        .collect::<Result<_>>()?;
    let m = mean(&per_set);
    // the optimum has risk equal to half the gain
    Ok(McEstimate {
        report: UtilityReport::new(2.0 * m, m, standard_error(&per_set)),
        per_set,
    })
}

/// Standard error of the mean of paired differences `a_i - b_i`.
pub fn paired_se(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(standard_error(&d))
}
