//! Noise-injection augmentation schemes and their optimal strengths.
//!
//! Three schemes perturb each price `S_i` with an independent draw `eps_i`:
//!
//! | scheme                 | perturbation                        | variance              |
//! |------------------------|-------------------------------------|-----------------------|
//! | additive               | `rho * eps`                         | `rho^2`               |
//! | naive multiplicative   | `rho0 * S_i * eps`                  | `rho0^2 S_i^2`        |
//! | proposed               | `c * sqrt(vol_i^2 |r_i|) * S_i * eps` | `c^2 vol_i^2 |r_i| S_i^2` |
//!
//! The proposed scheme follows the return magnitude, so quiet stretches of
//! the series get little noise and turbulent ones get a lot.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataio::{PriceSeries, ReturnSeries, Window};
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::procgen::GbmParams;

pub const DEFAULT_VOL_WINDOW: usize = 20;
pub const DEFAULT_SMOOTHING: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    None,
    Additive,
    NaiveMultiplicative,
    ProposedMultiplicative,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::None => "none",
            SchemeKind::Additive => "additive",
            SchemeKind::NaiveMultiplicative => "naive",
            SchemeKind::ProposedMultiplicative => "proposed",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SchemeKind::None),
            "additive" => Ok(SchemeKind::Additive),
            "naive" | "naive-multiplicative" => Ok(SchemeKind::NaiveMultiplicative),
            "proposed" | "proposed-multiplicative" => Ok(SchemeKind::ProposedMultiplicative),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

/// A scheme and its strength: `rho` (price units) for additive, `rho0` for
/// naive, `c` for proposed. Ignored for `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationScheme {
    pub kind: SchemeKind,
    pub strength: f64,
}

impl AugmentationScheme {
    pub fn none() -> Self {
        Self {
            kind: SchemeKind::None,
            strength: 0.0,
        }
    }

    pub fn new(kind: SchemeKind, strength: f64) -> Result<Self> {
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "augmentation strength must be finite and >= 0, got {strength}"
            )));
        }
        Ok(Self { kind, strength })
    }
}

/// Trailing volatility estimate, one entry per return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolEstimate {
    pub sigma_hat: Vec<f64>,
    pub window: usize,
}

impl VolEstimate {
    /// A constant estimate, e.g. a known model volatility.
    pub fn constant(sigma: f64, len: usize) -> Self {
        Self {
            sigma_hat: vec![sigma; len],
            window: 0,
        }
    }
}

/// Sample standard deviation over the trailing `window` returns ending at
/// each index; the first `window - 1` entries repeat the first full value.
pub fn estimate_volatility(returns: &ReturnSeries, window: usize) -> Result<VolEstimate> {
    let r = returns.values();
    if window < 2 {
        return Err(Error::InvalidParameter("volatility window must be at least 2".into()));
    }
    if r.len() < window {
        return Err(Error::WindowTooLarge { window, len: r.len() });
    }
    let mut sigma_hat = vec![0.0; r.len()];
    for t in window - 1..r.len() {
        sigma_hat[t] = crate::stats::sample_sd(&r[t + 1 - window..=t]);
    }
    let first = sigma_hat[window - 1];
    for v in sigma_hat.iter_mut().take(window - 1) {
        *v = first;
    }
    Ok(VolEstimate { sigma_hat, window })
}

/// Trailing mean of `|r|` over `tau` steps (fewer at the start of the series).
pub fn smooth_abs_returns(returns: &ReturnSeries, tau: usize) -> Result<Vec<f64>> {
    if tau == 0 {
        return Err(Error::InvalidParameter("smoothing window must be at least 1".into()));
    }
    let r = returns.values();
    let out = (0..r.len())
        .map(|t| {
            let lo = (t + 1).saturating_sub(tau);
            r[lo..=t].iter().map(|x| x.abs()).sum::<f64>() / (t + 1 - lo) as f64
        })
        .collect();
    Ok(out)
}

/// Return index whose magnitude scales the noise on price `i`: the forward
/// return `r_i`, with the last price reusing the final return.
fn return_index_for_price(i: usize, n_prices: usize) -> usize {
    i.min(n_prices - 2)
}

/// Prescribed perturbation variance for every price of `series`.
/// `vol = None` folds the volatility into the strength (`vol_i = 1`).
pub fn price_perturbation_variances(
    series: &PriceSeries,
    scheme: &AugmentationScheme,
    vol: Option<&VolEstimate>,
) -> Result<Vec<f64>> {
    let prices = series.prices();
    let n = prices.len();
    let k = scheme.strength;
    Ok(match scheme.kind {
        SchemeKind::None => vec![0.0; n],
        SchemeKind::Additive => vec![k * k; n],
        SchemeKind::NaiveMultiplicative => prices.iter().map(|s| k * k * s * s).collect(),
        SchemeKind::ProposedMultiplicative => {
            let returns = series.returns();
            let r = returns.values();
            if let Some(v) = vol {
                if v.sigma_hat.len() < r.len() {
                    return Err(Error::LengthMismatch {
                        left: v.sigma_hat.len(),
                        right: r.len(),
                    });
                }
            }
            (0..n)
                .map(|i| {
                    let j = return_index_for_price(i, n);
                    let sig = vol.map_or(1.0, |v| v.sigma_hat[j]);
                    k * k * sig * sig * r[j].abs() * prices[i] * prices[i]
                })
                .collect()
        }
    })
}

/// One augmented copy of the prices. Augmented values may be non-positive;
/// use [`noisified_returns`], which keeps the original denominators.
pub fn augment_prices(
    series: &PriceSeries,
    scheme: &AugmentationScheme,
    vol: Option<&VolEstimate>,
    noise: &mut NoiseStream,
) -> Result<Vec<f64>> {
    let var = price_perturbation_variances(series, scheme, vol)?;
    if scheme.kind == SchemeKind::None {
        return Ok(series.prices().to_vec());
    }
    Ok(series
        .prices()
        .iter()
        .zip(&var)
        .map(|(s, v)| s + v.sqrt() * noise.next_value())
        .collect())
}

/// `(z_next - z) / s` with the un-noised denominator `s`.
pub fn noisified_return(z_next: f64, z: f64, s: f64) -> f64 {
    (z_next - z) / s
}

pub fn noisified_returns(augmented: &[f64], original: &PriceSeries) -> Result<Vec<f64>> {
    if augmented.len() != original.len() {
        return Err(Error::LengthMismatch {
            left: augmented.len(),
            right: original.len(),
        });
    }
    Ok(augmented
        .windows(2)
        .zip(original.prices())
        .map(|(z, s)| noisified_return(z[1], z[0], *s))
        .collect())
}

/// Per-element noise variances (before the `c^2` factor) for a return-space
/// window: `vol_k^2 |r_k|` for each input return `k`, and for the target
/// the same expression at the target's own index.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnWindowScales {
    pub input: Vec<f64>,
    pub target: f64,
}

pub fn return_window_scales(window: &Window, returns: &ReturnSeries, vol: &VolEstimate) -> Result<ReturnWindowScales> {
    let r = returns.values();
    let t = window.target_index;
    let l = window.input.len();
    if t >= r.len() || t < l || vol.sigma_hat.len() < r.len() {
        return Err(Error::LengthMismatch {
            left: t + 1,
            right: r.len().min(vol.sigma_hat.len()),
        });
    }
    let scale = |k: usize| vol.sigma_hat[k] * vol.sigma_hat[k] * r[k].abs();
    Ok(ReturnWindowScales {
        input: (t - l..t).map(scale).collect(),
        target: scale(t),
    })
}

/// Perturb a return-space window: `r_k -> r_k + c sqrt(scale_k) eps_k`,
/// target included. Fresh draws on every call.
pub fn augment_returns(
    window: &Window,
    c: f64,
    scales: &ReturnWindowScales,
    noise: &mut NoiseStream,
) -> Result<(Vec<f64>, f64)> {
    if scales.input.len() != window.input.len() {
        return Err(Error::LengthMismatch {
            left: scales.input.len(),
            right: window.input.len(),
        });
    }
    let input = window
        .input
        .iter()
        .zip(&scales.input)
        .map(|(r, s)| r + c * s.sqrt() * noise.next_value())
        .collect();
    let target = window.target + c * scales.target.sqrt() * noise.next_value();
    Ok((input, target))
}

/// An optimal squared strength, or the infinite-strength corner that
/// prescribes a zero position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strength {
    Finite(f64),
    Unbounded,
}

impl Strength {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Strength::Finite(v) => Some(*v),
            Strength::Unbounded => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Strength::Unbounded)
    }
}

/// Closed-form optimal strengths for a training series under a GBM model.
/// All values are variances: `rho^2`, `rho0^2`, or one `gamma_t^2` per return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimalStrength {
    Additive(Strength),
    Naive(Strength),
    Proposed(Vec<Strength>),
}

fn check_model(model: &GbmParams) -> Result<()> {
    model.validate()?;
    if model.r == 0.0 {
        return Err(Error::ZeroDrift);
    }
    Ok(())
}

/// `rho^2 = (sigma^2 / 2r) * sum((r_t S_t^2)^2) / sum(r_t S_t^2)`, unbounded
/// when the denominator is not positive.
pub fn optimal_additive_variance(series: &PriceSeries, model: &GbmParams) -> Result<Strength> {
    check_model(model)?;
    let p = series.prices();
    let (mut first, mut second) = (0.0, 0.0);
    for (r, s) in series.returns().values().iter().zip(p) {
        let a = r * s * s;
        first += a;
        second += a * a;
    }
    Ok(if first > 0.0 {
        Strength::Finite(model.sigma * model.sigma / (2.0 * model.r) * second / first)
    } else {
        Strength::Unbounded
    })
}

/// `rho0^2 = (sigma^2 / 2r) * sum(r_t^2) / sum(r_t)`, unbounded when
/// `sum(r_t) <= 0`.
pub fn optimal_naive_variance(series: &PriceSeries, model: &GbmParams) -> Result<Strength> {
    check_model(model)?;
    let r = series.returns();
    let first: f64 = r.values().iter().sum();
    let second: f64 = r.values().iter().map(|x| x * x).sum();
    Ok(if first > 0.0 {
        Strength::Finite(model.sigma * model.sigma / (2.0 * model.r) * second / first)
    } else {
        Strength::Unbounded
    })
}

/// `gamma_t^2 = (sigma^2 / 2r) r_t S_t^2` for every step with a positive
/// return; other steps are unbounded.
pub fn optimal_proposed_variances(series: &PriceSeries, model: &GbmParams) -> Result<Vec<Strength>> {
    check_model(model)?;
    let k = model.sigma * model.sigma / (2.0 * model.r);
    Ok(series
        .returns()
        .values()
        .iter()
        .zip(series.prices())
        .map(|(r, s)| {
            let a = r * s * s;
            if a > 0.0 {
                Strength::Finite(k * a)
            } else {
                Strength::Unbounded
            }
        })
        .collect())
}

pub fn optimal_strength(kind: SchemeKind, series: &PriceSeries, model: &GbmParams) -> Result<OptimalStrength> {
    match kind {
        SchemeKind::None => Err(Error::InvalidParameter("no strength to optimize for scheme `none`".into())),
        SchemeKind::Additive => optimal_additive_variance(series, model).map(OptimalStrength::Additive),
        SchemeKind::NaiveMultiplicative => optimal_naive_variance(series, model).map(OptimalStrength::Naive),
        SchemeKind::ProposedMultiplicative => optimal_proposed_variances(series, model).map(OptimalStrength::Proposed),
    }
}

/// Multi-asset version of the proposed perturbation:
/// `S_i -> S_i + c sqrt(sum_j cov_ij |r_j| S_j^2) eps_i` with independent
/// `eps_i`. Rows whose weighted sum is negative (possible with negative
/// covariances) receive no noise.
pub fn multi_asset_noise(
    prices: &[f64],
    returns: &[f64],
    covariance: &DMatrix<f64>,
    c: f64,
    noise: &mut NoiseStream,
) -> Result<Vec<f64>> {
    let n = prices.len();
    if returns.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: returns.len(),
        });
    }
    if covariance.nrows() != n || covariance.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: covariance.nrows().max(covariance.ncols()),
        });
    }
    check_psd(covariance)?;
    let w: Vec<f64> = returns.iter().zip(prices).map(|(r, s)| r.abs() * s * s).collect();
    Ok((0..n)
        .map(|i| {
            let var: f64 = (0..n).map(|j| covariance[(i, j)] * w[j]).sum();
            prices[i] + c * var.max(0.0).sqrt() * noise.next_value()
        })
        .collect())
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPsd);
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
        return Err(Error::NotPsd);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSource;

    fn series(p: &[f64]) -> PriceSeries {
        PriceSeries::new(p.to_vec(), "t").unwrap()
    }

    #[test]
    fn volatility_examples() {
        let flat = ReturnSeries::new(vec![0.01; 50]).unwrap();
        let v = estimate_volatility(&flat, 20).unwrap();
        assert!(v.sigma_hat.iter().all(|s| *s == 0.0));

        let alt: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let v = estimate_volatility(&ReturnSeries::new(alt).unwrap(), 2).unwrap();
        let want = 0.01 * 2f64.sqrt();
        assert!(v.sigma_hat.iter().all(|s| (s - want).abs() < 1e-15));

        assert!(matches!(
            estimate_volatility(&ReturnSeries::new(vec![0.0; 5]).unwrap(), 6),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn smoothing_examples() {
        let r = ReturnSeries::new(vec![0.1, 0.0, 0.0, 0.1]).unwrap();
        let got = smooth_abs_returns(&r, 2).unwrap();
        let want = [0.1, 0.05, 0.0, 0.05];
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let mixed = ReturnSeries::new(vec![-0.3, 0.2, -0.1]).unwrap();
        assert_eq!(smooth_abs_returns(&mixed, 1).unwrap(), vec![0.3, 0.2, 0.1]);
        let c = ReturnSeries::new(vec![0.02; 40]).unwrap();
        assert!(smooth_abs_returns(&c, 20).unwrap().iter().all(|x| (x - 0.02).abs() < 1e-15));
    }

    #[test]
    fn identity_cases() {
        let s = series(&[1.0, 1.1, 1.05, 1.2]);
        let mut st = NoiseSource::new(1).stream(0);
        assert_eq!(augment_prices(&s, &AugmentationScheme::none(), None, &mut st).unwrap(), s.prices());
        let zero_c = AugmentationScheme::new(SchemeKind::ProposedMultiplicative, 0.0).unwrap();
        assert_eq!(augment_prices(&s, &zero_c, None, &mut st).unwrap(), s.prices());
        let flat = series(&[1.0, 1.0, 1.0]);
        let big = AugmentationScheme::new(SchemeKind::ProposedMultiplicative, 3.0).unwrap();
        let vol = VolEstimate::constant(0.5, 2);
        assert_eq!(augment_prices(&flat, &big, Some(&vol), &mut st).unwrap(), flat.prices());
    }

    #[test]
    fn noisified_return_uses_original_denominator() {
        assert!((noisified_return(1.02, 1.01, 1.0) - 0.01).abs() < 1e-15);
        let s = series(&[1.0, 1.1, 1.21]);
        assert_eq!(noisified_returns(s.prices(), &s).unwrap(), s.returns().values());
    }

    #[test]
    fn zero_returns_are_not_perturbed_in_return_space() {
        let r = ReturnSeries::new(vec![0.01, 0.0, -0.02, 0.0, 0.03]).unwrap();
        let ds = crate::dataio::WindowDataset::from_returns(&r, 3).unwrap();
        let vol = VolEstimate::constant(0.02, r.len());
        let w = &ds.windows[0];
        let sc = return_window_scales(w, &r, &vol).unwrap();
        let (inp, tgt) = augment_returns(w, 2.0, &sc, &mut NoiseSource::new(5).stream(0)).unwrap();
        assert_eq!(inp[1], 0.0);
        assert_eq!(tgt, 0.0);
        assert_ne!(inp[0], 0.01);
        let (inp0, tgt0) = augment_returns(w, 0.0, &sc, &mut NoiseSource::new(5).stream(0)).unwrap();
        assert_eq!((inp0, tgt0), (w.input.clone(), w.target));
    }

    #[test]
    fn proposed_strength_value() {
        // one return of exactly r at S = 1
        let s = series(&[1.0, 1.005]);
        let m = GbmParams::new(1.0, 0.005, 0.01).unwrap();
        let g = optimal_proposed_variances(&s, &m).unwrap();
        assert!((g[0].finite().unwrap() - 5e-5).abs() < 1e-17);
    }

    #[test]
    fn unbounded_and_errors() {
        let m = GbmParams::new(1.0, 0.005, 0.01).unwrap();
        let down = series(&[1.0, 0.99, 0.97, 0.96]);
        assert_eq!(optimal_additive_variance(&down, &m).unwrap(), Strength::Unbounded);
        assert_eq!(optimal_naive_variance(&down, &m).unwrap(), Strength::Unbounded);
        assert!(optimal_proposed_variances(&down, &m).unwrap().iter().all(Strength::is_unbounded));
        let flat = GbmParams::new(1.0, 0.0, 0.01).unwrap();
        assert!(matches!(optimal_additive_variance(&down, &flat), Err(Error::ZeroDrift)));
        assert!(optimal_strength(SchemeKind::None, &down, &m).is_err());
    }

    #[test]
    fn multi_asset_cases() {
        let mut st = NoiseSource::new(2).stream(0);
        let p = [1.0, 2.0];
        let r = [0.01, -0.04];
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(multi_asset_noise(&p, &r, &zero, 1.0, &mut st).unwrap(), p.to_vec());

        // identity covariance: scales sqrt(0.01 * 1), sqrt(0.04 * 4) = (0.1, 0.4)
        let eye = DMatrix::identity(2, 2);
        let eps = NoiseSource::new(2).stream(1).draw(2);
        let got = multi_asset_noise(&p, &r, &eye, 1.0, &mut NoiseSource::new(2).stream(1)).unwrap();
        assert!((got[0] - (1.0 + 0.1 * eps[0])).abs() < 1e-15);
        assert!((got[1] - (2.0 + 0.4 * eps[1])).abs() < 1e-15);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(multi_asset_noise(&p, &r, &bad, 1.0, &mut st), Err(Error::NotPsd)));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(multi_asset_noise(&p, &r, &asym, 1.0, &mut st), Err(Error::NotPsd)));
        assert!(matches!(
            multi_asset_noise(&p, &r[..1], &eye, 1.0, &mut st),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_asset_reduction() {
        let s = series(&[2.0, 2.1]);
        let sig2 = 0.0009;
        let cov = DMatrix::from_element(1, 1, sig2);
        let r = s.returns().values()[0];
        let multi = multi_asset_noise(&[2.0], &[r], &cov, 1.5, &mut NoiseSource::new(8).stream(0)).unwrap();
        let scheme = AugmentationScheme::new(SchemeKind::ProposedMultiplicative, 1.5).unwrap();
        let vol = VolEstimate::constant(sig2.sqrt(), 1);
        let single = augment_prices(&s, &scheme, Some(&vol), &mut NoiseSource::new(8).stream(0)).unwrap();
        assert!((multi[0] - single[0]).abs() < 1e-14);
    }
}
