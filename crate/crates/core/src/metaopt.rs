//! Choosing the augmentation parameter `theta` by maximizing the expected
//! true utility of the fitted closed-form portfolio over a grid, for a known
//! model, a prior over models, or the worst case over a model set.
//!
//! Under GBM the true utility of fixed positions is exact, so the only
//! expectation left to sample is the one over training sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{optimal_proposed_variances, Strength};
use crate::dataio::PriceSeries;
use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::portfolio::{augmented_closed_form, Constraint};
use crate::procgen::GbmParams;
use crate::stats::{mean, standard_error};
use crate::utility::{inner_true_utility, training_set};

/// How `theta` maps to per-step noise variances `gamma_t^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugFamily {
    /// `gamma_t^2 = theta^2`
    Additive,
    /// `gamma_t^2 = theta^2 S_t^2`
    Naive,
    /// `gamma_t^2 = theta^2 * (optimal proposed strength under the evaluated model)`
    ProposedScaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub values: Vec<f64>,
    pub family: AugFamily,
}

impl ThetaGrid {
    /// Values are sorted ascending, so ties resolve to the weaker augmentation.
    pub fn new(mut values: Vec<f64>, family: AugFamily) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("grid value {v} must be finite and >= 0")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, family })
    }

    /// `n` evenly spaced values on `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize, family: AugFamily) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGrid);
        }
        let values = if n == 1 {
            vec![lo]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        Self::new(values, family)
    }
}

/// Finite-support prior over model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaPrior {
    pub support: Vec<GbmParams>,
    pub weights: Vec<f64>,
}

impl OmegaPrior {
    pub fn new(support: Vec<GbmParams>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: support.len(),
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("prior weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("prior weights sum to {total}, not 1")));
        }
        Ok(Self { support, weights })
    }

    pub fn point_mass(model: GbmParams) -> Self {
        Self {
            support: vec![model],
            weights: vec![1.0],
        }
    }

    pub fn uniform(support: Vec<GbmParams>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n as f64; n])
    }
}

/// Training data for the outer expectation.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainingSets {
    /// `n` simulated sets of `steps` steps, drawn from the evaluated model
    /// with `noise`. Every theta sees the same sets.
    Sampled { n: usize, steps: usize, noise: NoiseSource },
    /// Fixed sets, used as-is for every model.
    Fixed(Vec<PriceSeries>),
}

impl TrainingSets {
    fn materialize(&self, model: &GbmParams) -> Result<Vec<PriceSeries>> {
        match self {
            TrainingSets::Sampled { n, steps, noise } => {
                if *n == 0 {
                    return Err(Error::InvalidParameter("need at least one training set".into()));
                }
                (0..*n).into_par_iter().map(|i| training_set(model, *steps, noise, i)).collect()
            }
            TrainingSets::Fixed(sets) => {
                if sets.is_empty() {
                    return Err(Error::InvalidParameter("need at least one training set".into()));
                }
                Ok(sets.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaCurve {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub se: Vec<f64>,
}

impl ThetaCurve {
    pub fn argmax(&self) -> (f64, f64) {
        let i = select_max(&self.values);
        (self.thetas[i], self.values[i])
    }
}

/// Per-step noise variances for one training set under `theta`.
pub fn family_strengths(family: AugFamily, theta: f64, series: &PriceSeries, model: &GbmParams) -> Result<Vec<Strength>> {
    let t2 = theta * theta;
    let n = series.len() - 1;
    Ok(match family {
        AugFamily::Additive => vec![Strength::Finite(t2); n],
        AugFamily::Naive => series.prices()[..n].iter().map(|s| Strength::Finite(t2 * s * s)).collect(),
        AugFamily::ProposedScaled => optimal_proposed_variances(series, model)?
            .into_iter()
            .map(|g| match g {
                Strength::Finite(v) => Strength::Finite(t2 * v),
                Strength::Unbounded => Strength::Unbounded,
            })
            .collect(),
    })
}

/// Positions fitted on `series` by the augmented closed form.
pub fn fitted_weights(
    family: AugFamily,
    theta: f64,
    series: &PriceSeries,
    model: &GbmParams,
    lambda: f64,
    constraint: Constraint,
) -> Result<Vec<f64>> {
    let g = family_strengths(family, theta, series, model)?;
    Ok(augmented_closed_form(&series.returns(), series, lambda, &g, constraint)?.weights)
}

/// Expected true utility `V(theta)` for every grid value under one model.
pub fn value_curve(
    grid: &ThetaGrid,
    model: &GbmParams,
    lambda: f64,
    sets: &TrainingSets,
    constraint: Constraint,
) -> Result<ThetaCurve> {
    let sets = sets.materialize(model)?;
    let rows: Vec<(f64, f64)> = grid
        .values
        .par_iter()
        .map(|&theta| {
            let per_set: Vec<f64> = sets
                .iter()
                .map(|s| {
                    let w = fitted_weights(grid.family, theta, s, model, lambda, constraint)?;
                    Ok(inner_true_utility(&w, model, lambda).value)
                })
                .collect::<Result<_>>()?;
            Ok((mean(&per_set), standard_error(&per_set)))
        })
        .collect::<Result<_>>()?;
    Ok(ThetaCurve {
        thetas: grid.values.clone(),
        values: rows.iter().map(|r| r.0).collect(),
        se: rows.iter().map(|r| r.1).collect(),
    })
}

/// `argmax_theta V(theta)`.
pub fn best_theta(
    grid: &ThetaGrid,
    model: &GbmParams,
    lambda: f64,
    sets: &TrainingSets,
    constraint: Constraint,
) -> Result<(f64, ThetaCurve)> {
    let curve = value_curve(grid, model, lambda, sets, constraint)?;
    Ok((curve.argmax().0, curve))
}

/// `V` for every (theta, model) pair; rows follow the grid.
pub fn value_matrix(
    grid: &ThetaGrid,
    models: &[GbmParams],
    lambda: f64,
    sets: &TrainingSets,
    constraint: Constraint,
) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<ThetaCurve> = models
        .iter()
        .map(|m| value_curve(grid, m, lambda, sets, constraint))
        .collect::<Result<_>>()?;
    Ok((0..grid.values.len())
        .map(|i| cols.iter().map(|c| c.values[i]).collect())
        .collect())
}

/// `argmax_theta E_prior[V(theta)]`, returning the theta and the averaged curve.
pub fn bayes_theta(
    grid: &ThetaGrid,
    prior: &OmegaPrior,
    lambda: f64,
    sets: &TrainingSets,
    constraint: Constraint,
) -> Result<(f64, Vec<f64>)> {
    let (models, weights): (Vec<GbmParams>, Vec<f64>) = prior
        .support
        .iter()
        .zip(&prior.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, w)| (*m, *w))
        .unzip();
    let matrix = value_matrix(grid, &models, lambda, sets, constraint)?;
    let i = select_max_weighted(&matrix, &weights)?;
    let avg = matrix
        .iter()
        .map(|row| row.iter().zip(&weights).map(|(v, w)| v * w).sum())
        .collect();
    Ok((grid.values[i], avg))
}

/// `argmax_theta min_omega V(theta, omega)`, returning the theta and the
/// row minima.
pub fn minimax_theta(
    grid: &ThetaGrid,
    omegas: &[GbmParams],
    lambda: f64,
    sets: &TrainingSets,
    constraint: Constraint,
) -> Result<(f64, Vec<f64>)> {
    if omegas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let matrix = value_matrix(grid, omegas, lambda, sets, constraint)?;
    let i = select_maximin(&matrix)?;
    let minima = matrix.iter().map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    Ok((grid.values[i], minima))
}

/// Index of the largest value; the first one wins ties. NaN never wins.
pub fn select_max(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Row whose weighted mean is largest.
pub fn select_max_weighted(matrix: &[Vec<f64>], weights: &[f64]) -> Result<usize> {
    if matrix.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let scores: Vec<f64> = matrix
        .iter()
        .map(|row| row.iter().zip(weights).map(|(v, w)| v * w).sum())
        .collect();
    Ok(select_max(&scores))
}

/// Row whose minimum is largest.
pub fn select_maximin(matrix: &[Vec<f64>]) -> Result<usize> {
    if matrix.is_empty() || matrix.iter().any(|r| r.is_empty()) {
        return Err(Error::EmptyGrid);
    }
    let minima: Vec<f64> = matrix
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    Ok(select_max(&minima))
}
