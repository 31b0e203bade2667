//! Seeded noise sources.
//!
//! Every random draw in the crate comes from a [`NoiseStream`], which is a
//! ChaCha8 generator keyed by `(seed, stream index)`. Batch work (one stream
//! per trajectory, per training set, per window) is therefore independent of
//! scheduling: stream `i` produces the same numbers whether it runs first,
//! last or on another thread.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-mean, unit-variance distribution used for injected and simulated noise.
///
/// Only the first two moments matter for the mean-variance utility, so any of
/// these is a valid choice for augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseDistribution {
    StandardNormal,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
    /// `+1` or `-1` with equal probability.
    Rademacher,
    /// Student-t rescaled to unit variance; requires `dof > 2`.
    StudentT { dof: f64 },
}

impl Default for NoiseDistribution {
    fn default() -> Self {
        NoiseDistribution::StandardNormal
    }
}

impl NoiseDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseDistribution::StudentT { dof } if !(dof > 2.0 && dof.is_finite()) => Err(
                Error::InvalidParameter(format!("student-t needs dof > 2 for unit variance, got {dof}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseDistribution::StandardNormal => StandardNormal.sample(rng),
            NoiseDistribution::Uniform => {
                let u: f64 = rng.random();
                (2.0 * u - 1.0) * 3f64.sqrt()
            }
            NoiseDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseDistribution::StudentT { dof } => {
                // validated on construction of the source
                let t = StudentT::new(dof).expect("student-t dof");
                t.sample(rng) * ((dof - 2.0) / dof).sqrt()
            }
        }
    }
}

/// A family of reproducible noise streams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub seed: u64,
    #[serde(default)]
    pub distribution: NoiseDistribution,
}

impl NoiseSource {
    /// Standard-normal source.
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            distribution: NoiseDistribution::StandardNormal,
        }
    }

    pub fn with_distribution(seed: u64, distribution: NoiseDistribution) -> Result<Self> {
        distribution.validate()?;
        Ok(Self { seed, distribution })
    }

    /// Stream number `index` of this family.
    pub fn stream(&self, index: u64) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        NoiseStream {
            rng,
            distribution: self.distribution,
        }
    }

    /// A named sub-family. Different names give unrelated seeds; the same
    /// `(seed, name)` always gives the same family.
    pub fn derive(&self, name: &str) -> NoiseSource {
        // FNV-1a over the name, then a splitmix64 finalizer with the parent seed
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        NoiseSource {
            seed: splitmix64(self.seed ^ h),
            distribution: self.distribution,
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One deterministic sequence of draws.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    distribution: NoiseDistribution,
}

impl NoiseStream {
    pub fn next_value(&mut self) -> f64 {
        self.distribution.sample(&mut self.rng)
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.distribution.sample(&mut self.rng);
        }
    }

    pub fn draw(&mut self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill(&mut out);
        out
    }

    /// The underlying generator, for non-noise randomness such as shuffling.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn same_stream_same_draws() {
        let src = NoiseSource::new(42);
        assert_eq!(src.stream(3).draw(16), src.stream(3).draw(16));
        assert_ne!(src.stream(3).draw(16), src.stream(4).draw(16));
        assert_ne!(src.stream(0).draw(4), NoiseSource::new(43).stream(0).draw(4));
    }

    #[test]
    fn derived_families_are_stable_and_distinct() {
        let src = NoiseSource::new(7);
        assert_eq!(src.derive("train"), src.derive("train"));
        assert_ne!(src.derive("train").seed, src.derive("test").seed);
        assert_ne!(src.derive("train").seed, src.seed);
    }

    #[test]
    fn every_distribution_is_standardized() {
        let n = 200_000;
        for dist in [
            NoiseDistribution::StandardNormal,
            NoiseDistribution::Uniform,
            NoiseDistribution::Rademacher,
            NoiseDistribution::StudentT { dof: 8.0 },
        ] {
            let src = NoiseSource::with_distribution(11, dist).unwrap();
            let xs = src.stream(0).draw(n);
            let (m, v) = moments(&xs);
            // mean within 4 SE; variance within a loose band (heavy tails for t)
            assert!(m.abs() < 4.0 / (n as f64).sqrt(), "{dist:?} mean {m}");
            assert!((v - 1.0).abs() < 0.03, "{dist:?} var {v}");
        }
    }

    #[test]
    fn student_t_needs_finite_variance() {
        assert!(NoiseSource::with_distribution(0, NoiseDistribution::StudentT { dof: 2.0 }).is_err());
    }
}
