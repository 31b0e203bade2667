//! Synthetic price paths: discrete geometric Brownian motion and a
//! full-truncation Euler discretization of the Heston model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::PriceSeries;
use crate::error::{Error, Result};
use crate::noise::{NoiseSource, NoiseStream};

/// Discrete GBM: `S[t+1] = (1 + r) S[t] + sigma S[t] eta[t]`, all quantities per step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub s0: f64,
    pub r: f64,
    pub sigma: f64,
}

impl GbmParams {
    pub fn new(s0: f64, r: f64, sigma: f64) -> Result<Self> {
        let p = Self { s0, r, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::InvalidParameter(format!("s0 must be positive, got {}", self.s0)));
        }
        if !self.r.is_finite() {
            return Err(Error::InvalidParameter(format!("r must be finite, got {}", self.r)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub s0: f64,
    pub r: f64,
    pub nu0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
    pub dt: f64,
}

impl HestonParams {
    pub const DEFAULT_XI: f64 = 0.1;

    /// Heston parameters with `xi = 0.1`, `rho = 0` and `dt = 1`.
    pub fn new(s0: f64, r: f64, nu0: f64, kappa: f64, theta: f64) -> Result<Self> {
        let p = Self {
            s0,
            r,
            nu0,
            kappa,
            theta,
            xi: Self::DEFAULT_XI,
            rho: 0.0,
            dt: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// The Heston process that coincides with `gbm` (no mean reversion, no vol-of-vol).
    pub fn from_gbm(gbm: &GbmParams) -> Self {
        Self {
            s0: gbm.s0,
            r: gbm.r,
            nu0: gbm.sigma * gbm.sigma,
            kappa: 0.0,
            theta: 0.0,
            xi: 0.0,
            rho: 0.0,
            dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| Error::InvalidParameter(format!("{name} = {v} is out of range"));
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(bad("s0", self.s0));
        }
        if !self.r.is_finite() {
            return Err(bad("r", self.r));
        }
        for (name, v) in [("nu0", self.nu0), ("kappa", self.kappa), ("theta", self.theta), ("xi", self.xi)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(name, v));
            }
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(bad("rho", self.rho));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt", self.dt));
        }
        Ok(())
    }
}

/// Price path plus the variance path (same length) of one Heston trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct HestonPath {
    pub prices: PriceSeries,
    pub variance: Vec<f64>,
}

/// One GBM trajectory of `steps` steps (`steps + 1` prices).
pub fn simulate_gbm(params: &GbmParams, steps: usize, noise: &mut NoiseStream) -> Result<PriceSeries> {
    params.validate()?;
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let mut prices = Vec::with_capacity(steps + 1);
    let mut s = params.s0;
    prices.push(s);
    for step in 1..=steps {
        let eta = noise.next_value();
        // same operation order as the Heston update with dt = 1
        s = s + params.r * s + params.sigma * s * eta;
        if !(s > 0.0) {
            return Err(Error::NonPositivePriceGenerated { step });
        }
        prices.push(s);
    }
    PriceSeries::new(prices, "gbm")
}

/// Full-truncation Euler scheme. `price_noise` drives the price shock and
/// `variance_noise` the independent part of the variance shock, so with
/// `kappa = xi = 0` and `nu0 = sigma^2` the price path reproduces
/// [`simulate_gbm`] on the same price stream bit for bit.
pub fn simulate_heston(
    params: &HestonParams,
    steps: usize,
    price_noise: &mut NoiseStream,
    variance_noise: &mut NoiseStream,
) -> Result<HestonPath> {
    params.validate()?;
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let sqrt_dt = params.dt.sqrt();
    let rho_perp = (1.0 - params.rho * params.rho).sqrt();
    let mut prices = Vec::with_capacity(steps + 1);
    let mut variance = Vec::with_capacity(steps + 1);
    let (mut s, mut nu) = (params.s0, params.nu0);
    prices.push(s);
    variance.push(nu);
    for step in 1..=steps {
        let z_s = price_noise.next_value();
        let z_perp = variance_noise.next_value();
        let z_nu = params.rho * z_s + rho_perp * z_perp;
        let nu_plus = nu.max(0.0);
        let vol = nu_plus.sqrt();
        s = s + params.r * s * params.dt + vol * s * z_s * sqrt_dt;
        nu = nu + params.kappa * (params.theta - nu_plus) * params.dt + params.xi * vol * z_nu * sqrt_dt;
        if !(s > 0.0) {
            return Err(Error::NonPositivePriceGenerated { step });
        }
        prices.push(s);
        variance.push(nu);
    }
    Ok(HestonPath {
        prices: PriceSeries::new(prices, "heston")?,
        variance,
    })
}

/// `count` GBM trajectories; trajectory `i` uses stream `i` of `noise`.
pub fn gbm_paths(params: &GbmParams, steps: usize, count: usize, noise: &NoiseSource) -> Result<Vec<PriceSeries>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_gbm(params, steps, &mut noise.stream(i)))
        .collect()
}

/// `count` Heston trajectories; price shocks use stream `i` of `noise` (the
/// same streams as [`gbm_paths`]) and variance shocks a derived family.
pub fn heston_paths(params: &HestonParams, steps: usize, count: usize, noise: &NoiseSource) -> Result<Vec<HestonPath>> {
    let var_family = noise.derive("heston-variance");
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_heston(params, steps, &mut noise.stream(i), &mut var_family.stream(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_gbm_is_compound_growth() {
        let p = GbmParams::new(1.0, 0.005, 0.0).unwrap();
        let s = simulate_gbm(&p, 3, &mut NoiseSource::new(1).stream(0)).unwrap();
        let want = [1.0, 1.005, 1.010025, 1.015075125];
        for (a, b) in s.prices().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn seeded_paths_repeat() {
        let p = GbmParams::new(1.0, 0.005, 0.01).unwrap();
        let src = NoiseSource::new(9);
        let a = gbm_paths(&p, 50, 8, &src).unwrap();
        let b = gbm_paths(&p, 50, 8, &src).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[3], simulate_gbm(&p, 50, &mut src.stream(3)).unwrap());
    }

    #[test]
    fn negative_price_is_an_error() {
        let p = GbmParams::new(1.0, 0.0, 5.0).unwrap();
        let err = (0..50)
            .map(|i| simulate_gbm(&p, 100, &mut NoiseSource::new(i).stream(0)))
            .find(|r| r.is_err())
            .expect("sigma = 5 must hit zero");
        assert!(matches!(err, Err(Error::NonPositivePriceGenerated { .. })));
    }

    #[test]
    fn noise_free_variance_follows_mean_reversion() {
        let mut h = HestonParams::new(1.0, 0.001, 1e-4, 0.25, 4e-4).unwrap();
        h.xi = 0.0;
        let path = simulate_heston(&h, 20, &mut NoiseSource::new(3).stream(0), &mut NoiseSource::new(4).stream(0))
            .unwrap();
        let mut nu = h.nu0;
        for v in &path.variance {
            assert_eq!(*v, nu);
            nu = nu + h.kappa * (h.theta - nu) * h.dt;
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GbmParams::new(0.0, 0.0, 0.1).is_err());
        assert!(GbmParams::new(1.0, 0.0, -0.1).is_err());
        let mut h = HestonParams::new(1.0, 0.0, 1e-4, 0.1, 1e-4).unwrap();
        h.rho = 1.5;
        assert!(h.validate().is_err());
    }
}
