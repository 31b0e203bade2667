//! Small descriptive-statistics helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal c.d.f.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divides by `n - 1`), shifted by the first
/// element so constant input gives exactly zero.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let k = xs[0];
    let (s, s2) = xs.iter().fold((0.0, 0.0), |(s, s2), x| (s + (x - k), s2 + (x - k) * (x - k)));
    ((s2 - s * s / n as f64) / (n - 1) as f64).max(0.0)
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Standard error of the mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    sample_sd(xs) / (xs.len() as f64).sqrt()
}

/// Sample autocorrelation at `lag` (biased normalization, as in the usual ACF plot).
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    if lag >= n {
        return f64::NAN;
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum();
    num / denom
}
