//! Closed-form portfolios: the sign strategy, augmented per-step maximizers,
//! the stationary optimum and the classical multi-asset solution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::augment::Strength;
use crate::dataio::{PriceSeries, ReturnSeries};
use crate::error::{Error, Result};
use crate::procgen::GbmParams;

/// Above this 2-norm condition number a covariance is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    #[default]
    Unbounded,
    /// `[-1, 1]`
    Box,
    /// `[0, 1]`
    LongOnly,
}

impl Constraint {
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Constraint::Unbounded => (f64::NEG_INFINITY, f64::INFINITY),
            Constraint::Box => (-1.0, 1.0),
            Constraint::LongOnly => (0.0, 1.0),
        }
    }

    pub fn apply(&self, w: f64) -> f64 {
        let (lo, hi) = self.bounds();
        w.clamp(lo, hi)
    }

    pub fn contains(&self, w: f64) -> bool {
        let (lo, hi) = self.bounds();
        (lo..=hi).contains(&w)
    }
}

/// Per-step fraction of wealth held in the risky asset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub weights: Vec<f64>,
    pub constraint: Constraint,
}

impl Portfolio {
    pub fn new(weights: Vec<f64>, constraint: Constraint) -> Self {
        let weights = weights.into_iter().map(|w| constraint.apply(w)).collect();
        Self { weights, constraint }
    }

    pub fn constant(w: f64, len: usize, constraint: Constraint) -> Self {
        Self::new(vec![w; len], constraint)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("risk aversion must be positive, got {lambda}")))
    }
}

/// `+1` where `r_t >= 0`, `-1` otherwise.
pub fn sign_strategy(returns: &ReturnSeries) -> Portfolio {
    let w = returns
        .values()
        .iter()
        .map(|r| if *r >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    Portfolio {
        weights: w,
        constraint: Constraint::Box,
    }
}

/// Per-step maximizer of the augmented training utility,
/// `pi_t = r_t S_t^2 / (2 lambda gamma_t^2)`. An unbounded strength gives a
/// zero position; a zero strength gives the sign strategy.
pub fn augmented_closed_form(
    returns: &ReturnSeries,
    prices: &PriceSeries,
    lambda: f64,
    gamma_sq: &[Strength],
    constraint: Constraint,
) -> Result<Portfolio> {
    check_lambda(lambda)?;
    let r = returns.values();
    if gamma_sq.len() != r.len() {
        return Err(Error::LengthMismatch {
            left: gamma_sq.len(),
            right: r.len(),
        });
    }
    if prices.len() < r.len() {
        return Err(Error::LengthMismatch {
            left: prices.len(),
            right: r.len(),
        });
    }
    let w = r
        .iter()
        .zip(prices.prices())
        .zip(gamma_sq)
        .map(|((&rt, &s), g)| match *g {
            Strength::Unbounded => 0.0,
            _ if rt == 0.0 => 0.0,
            Strength::Finite(v) if v > 0.0 => rt * s * s / (2.0 * lambda * v),
            Strength::Finite(_) => rt.signum(),
        })
        .collect();
    Ok(Portfolio::new(w, constraint))
}

/// `(r / (lambda sigma^2)) * H(r_t)` with `H(0) = 1`.
pub fn proposed_optimal_portfolio(
    returns: &ReturnSeries,
    model: &GbmParams,
    lambda: f64,
    constraint: Constraint,
) -> Result<Portfolio> {
    let m = merton_stationary(model, lambda)?;
    let w = returns
        .values()
        .iter()
        .map(|r| if *r >= 0.0 { m } else { 0.0 })
        .collect();
    Ok(Portfolio::new(w, constraint))
}

/// `r / (lambda sigma^2)`.
pub fn merton_stationary(model: &GbmParams, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    model.validate()?;
    if model.sigma == 0.0 {
        return Err(Error::ZeroVolatility);
    }
    Ok(model.r / (lambda * model.sigma * model.sigma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkowitzSolution {
    pub weights: Vec<f64>,
    /// `g' pi / lambda`, which equals `g' C^-1 g / lambda^2` at the optimum.
    pub in_sample_risk: f64,
    /// `pi' C_true pi`, present when a true covariance was supplied.
    pub true_risk: Option<f64>,
}

/// `pi = C^-1 g / lambda` via a Cholesky solve.
pub fn markowitz_multi(
    g: &[f64],
    c: &DMatrix<f64>,
    lambda: f64,
    c_true: Option<&DMatrix<f64>>,
) -> Result<MarkowitzSolution> {
    check_lambda(lambda)?;
    let n = g.len();
    for m in std::iter::once(c).chain(c_true) {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows().max(m.ncols()),
            });
        }
    }
    let eig = c.clone().symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l.abs())));
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::SingularCovariance {
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        });
    }
    let chol = c.clone().cholesky().ok_or(Error::SingularCovariance {
        condition: f64::INFINITY,
    })?;
    let gv = DVector::from_column_slice(g);
    let pi = chol.solve(&gv) / lambda;
    let in_sample_risk = gv.dot(&pi) / lambda;
    let true_risk = c_true.map(|ct| pi.dot(&(ct * &pi)));
    Ok(MarkowitzSolution {
        weights: pi.iter().copied().collect(),
        in_sample_risk,
        true_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(v: &[f64]) -> ReturnSeries {
        ReturnSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sign_strategy_ties_invest() {
        assert_eq!(sign_strategy(&rs(&[0.01, -0.02, 0.0])).weights, vec![1.0, -1.0, 1.0]);
        assert_eq!(sign_strategy(&rs(&[0.1, 0.2])).weights, vec![1.0, 1.0]);
    }

    #[test]
    fn closed_form_cases() {
        let p = PriceSeries::new(vec![1.0, 1.005, 1.005], "").unwrap();
        let r = p.returns();
        let g = [Strength::Finite(5e-5), Strength::Finite(5e-5)];
        let free = augmented_closed_form(&r, &p, 1.0, &g, Constraint::Unbounded).unwrap();
        assert!((free.weights[0] - 50.0).abs() < 1e-9);
        assert_eq!(free.weights[1], 0.0);
        let boxed = augmented_closed_form(&r, &p, 1.0, &g, Constraint::Box).unwrap();
        assert_eq!(boxed.weights[0], 1.0);
        let unb = [Strength::Unbounded, Strength::Finite(1.0)];
        assert_eq!(augmented_closed_form(&r, &p, 1.0, &unb, Constraint::Box).unwrap().weights[0], 0.0);
    }

    #[test]
    fn stationary_and_proposed() {
        let m = GbmParams::new(1.0, 0.005, 0.01).unwrap();
        assert!((merton_stationary(&m, 1.0).unwrap() - 50.0).abs() < 1e-9);
        assert!((merton_stationary(&m, 2.0).unwrap() - 25.0).abs() < 1e-9);
        let flat = GbmParams::new(1.0, 0.0, 0.01).unwrap();
        assert_eq!(merton_stationary(&flat, 1.0).unwrap(), 0.0);
        let still = GbmParams::new(1.0, 0.005, 0.0).unwrap();
        assert!(matches!(merton_stationary(&still, 1.0), Err(Error::ZeroVolatility)));

        let p = proposed_optimal_portfolio(&rs(&[0.01, -0.01]), &m, 1.0, Constraint::Unbounded).unwrap();
        assert!((p.weights[0] - 50.0).abs() < 1e-9);
        assert_eq!(p.weights[1], 0.0);
        let mut last = f64::INFINITY;
        for lambda in [1.0, 10.0, 100.0, 1e4] {
            let w = proposed_optimal_portfolio(&rs(&[0.01]), &m, lambda, Constraint::Unbounded).unwrap().weights[0];
            assert!(w < last);
            last = w;
        }
    }

    #[test]
    fn markowitz_identity() {
        let c = DMatrix::identity(2, 2);
        let s = markowitz_multi(&[0.1, 0.2], &c, 1.0, Some(&c)).unwrap();
        assert!((s.weights[0] - 0.1).abs() < 1e-15 && (s.weights[1] - 0.2).abs() < 1e-15);
        assert!((s.in_sample_risk - 0.05).abs() < 1e-15);
        assert_eq!(s.true_risk.unwrap(), s.in_sample_risk);
    }

    #[test]
    fn markowitz_true_risk_by_hand() {
        let c_hat = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = DMatrix::from_row_slice(2, 2, &[1.5, -0.2, -0.2, 0.8]);
        let g = [0.3, -0.1];
        let lambda = 2.0;
        let s = markowitz_multi(&g, &c_hat, lambda, Some(&c)).unwrap();
        // explicit 2x2 inverse
        let det = 2.0 * 1.0 - 0.5 * 0.5;
        let inv = [[1.0 / det, -0.5 / det], [-0.5 / det, 2.0 / det]];
        let w = [
            (inv[0][0] * g[0] + inv[0][1] * g[1]) / lambda,
            (inv[1][0] * g[0] + inv[1][1] * g[1]) / lambda,
        ];
        let risk = 1.5 * w[0] * w[0] + 2.0 * -0.2 * w[0] * w[1] + 0.8 * w[1] * w[1];
        assert!((s.true_risk.unwrap() - risk).abs() < 1e-12);
        assert!((s.weights[0] - w[0]).abs() < 1e-14);
    }

    #[test]
    fn markowitz_errors() {
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            markowitz_multi(&[0.1, 0.1], &sing, 1.0, None),
            Err(Error::SingularCovariance { .. })
        ));
        assert!(matches!(
            markowitz_multi(&[0.1], &DMatrix::identity(2, 2), 1.0, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
