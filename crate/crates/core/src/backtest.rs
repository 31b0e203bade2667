//! Wealth backtests, the per-step Sharpe ratio and market-capital-line slopes.

use serde::{Deserialize, Serialize};

use crate::dataio::PriceSeries;
use crate::error::{Error, Result};

/// Wealth path `W_0 = 1, W_{t+1} = W_t (1 + pi_t r_t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WealthTrajectory {
    pub wealth: Vec<f64>,
    pub positions: Vec<f64>,
    /// Price returns realised at each position.
    pub returns: Vec<f64>,
    /// Set when wealth hit zero or below; the path stops at that point.
    pub bankrupt: bool,
}

impl WealthTrajectory {
    pub fn final_wealth(&self) -> f64 {
        *self.wealth.last().expect("wealth path is never empty")
    }

    /// Compound positions against returns.
    pub fn from_positions(positions: &[f64], returns: &[f64]) -> Result<Self> {
        if positions.len() != returns.len() {
            return Err(Error::LengthMismatch {
                left: positions.len(),
                right: returns.len(),
            });
        }
        let mut out = WealthTrajectory {
            wealth: vec![1.0],
            positions: Vec::with_capacity(positions.len()),
            returns: Vec::with_capacity(returns.len()),
            bankrupt: false,
        };
        for (&p, &r) in positions.iter().zip(returns) {
            out.push(p, r);
            if out.bankrupt {
                break;
            }
        }
        Ok(out)
    }

    fn push(&mut self, position: f64, ret: f64) {
        let w = self.final_wealth() * (1.0 + position * ret);
        self.positions.push(position);
        self.returns.push(ret);
        self.wealth.push(w);
        if w <= 0.0 {
            self.bankrupt = true;
        }
    }
}

/// Roll `rule` over `test`: at step `t` it sees the `lookback` returns
/// ending at `t - 1` and its position earns `r_t`.
pub fn run_backtest<F>(rule: F, test: &PriceSeries, lookback: usize) -> Result<WealthTrajectory>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut rule = rule;
    let r = test.returns();
    let r = r.values();
    if r.len() <= lookback {
        return Err(Error::SeriesTooShort {
            len: test.len(),
            required: lookback + 2,
        });
    }
    let mut out = WealthTrajectory {
        wealth: vec![1.0],
        positions: Vec::with_capacity(r.len() - lookback),
        returns: Vec::with_capacity(r.len() - lookback),
        bankrupt: false,
    };
    for t in lookback..r.len() {
        let p = rule(&r[t - lookback..t]);
        out.push(p, r[t]);
        if out.bankrupt {
            break;
        }
    }
    Ok(out)
}

/// Per-step wealth returns `W_{i+1} / W_i - 1`.
pub fn wealth_returns(wealth: &[f64]) -> Vec<f64> {
    wealth.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

/// Mean wealth return over its population standard deviation.
pub fn sharpe(traj: &WealthTrajectory) -> Result<f64> {
    sharpe_of_wealth(&traj.wealth)
}

pub fn sharpe_of_wealth(wealth: &[f64]) -> Result<f64> {
    if wealth.len() < 2 {
        return Err(Error::SeriesTooShort {
            len: wealth.len(),
            required: 2,
        });
    }
    let r = wealth_returns(wealth);
    let n = r.len() as f64;
    let m = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let scale = r.iter().map(|x| x * x).sum::<f64>() / n;
    if var <= 1e-12 * scale || var == 0.0 {
        return Err(Error::ZeroDispersion);
    }
    Ok(m / var.sqrt())
}

/// A return-risk combination on the capital-line plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MclPoint {
    pub mean_return: f64,
    pub risk: f64,
    pub label: String,
}

impl MclPoint {
    pub fn from_trajectory(traj: &WealthTrajectory, label: impl Into<String>) -> Self {
        let r = wealth_returns(&traj.wealth);
        let n = r.len().max(1) as f64;
        let m = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        Self {
            mean_return: m,
            risk: var.sqrt(),
            label: label.into(),
        }
    }
}

/// Smallest risk per unit of excess return, `risk / (mean - r0)`, over the
/// points that beat `r0`. Smaller is better.
pub fn mcl_slope(points: &[MclPoint], r0: f64) -> Result<(MclPoint, f64)> {
    points
        .iter()
        .filter(|p| p.mean_return > r0)
        .map(|p| (p, p.risk / (p.mean_return - r0)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, s)| (p.clone(), s))
        .ok_or(Error::NoExcessReturn)
}
