//! Fully connected network with ReLU hidden layers and a scalar output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseStream;

const CHECKPOINT_FORMAT: &str = "augport-mlp";
const CHECKPOINT_VERSION: u32 = 1;

/// Output transform applied to the last layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Head {
    Identity,
    /// `lo + (hi - lo) * sigmoid(z)`
    Squash { lo: f64, hi: f64 },
}

impl Head {
    fn apply(&self, z: f64) -> (f64, f64) {
        match *self {
            Head::Identity => (z, 1.0),
            Head::Squash { lo, hi } => {
                let s = sigmoid(z);
                (lo + (hi - lo) * s, (hi - lo) * s * (1.0 - s))
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Parameters are stored flat, layer by layer: the `out x in` weight matrix
/// (row-major) followed by the `out` biases. A first size of zero gives a
/// model that ignores its input and outputs the head of its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    sizes: Vec<usize>,
    params: Vec<f64>,
    head: Head,
    /// Inputs are multiplied by this before the first layer.
    input_scale: f64,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: MlpModel,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpModel {
    /// He-initialized weights, zero biases.
    pub fn new(sizes: &[usize], head: Head, noise: &mut NoiseStream) -> Result<Self> {
        let mut m = Self::zeros(sizes, head)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = if fan_in > 0 { (2.0 / fan_in as f64).sqrt() } else { 0.0 };
            for p in &mut m.params[offset..offset + fan_in * fan_out] {
                *p = scale * noise.next_value();
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(m)
    }

    pub fn zeros(sizes: &[usize], head: Head) -> Result<Self> {
        if sizes.len() < 2 || sizes[1..].contains(&0) || *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidParameter(format!(
                "layer sizes {sizes:?} must have a single output and no empty hidden layer"
            )));
        }
        if let Head::Squash { lo, hi } = head {
            if !(lo < hi) {
                return Err(Error::InvalidParameter(format!("empty output box [{lo}, {hi}]")));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
            head,
            input_scale: 1.0,
        })
    }

    /// An input-independent model with identity head and output `value`.
    pub fn constant(value: f64) -> Self {
        Self {
            sizes: vec![0, 1],
            params: vec![value],
            head: Head::Identity,
            input_scale: 1.0,
        }
    }

    pub fn with_input_scale(mut self, scale: f64) -> Self {
        self.input_scale = scale;
        self
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_scale(&self) -> f64 {
        self.input_scale
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `true` for weights, `false` for biases.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.params.len());
        for w in self.sizes.windows(2) {
            mask.extend(std::iter::repeat_n(true, w[0] * w[1]));
            mask.extend(std::iter::repeat_n(false, w[1]));
        }
        mask
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if self.sizes[0] != 0 && input.len() != self.sizes[0] {
            return Err(Error::SizeMismatch {
                expected: self.sizes[0],
                found: input.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations of every layer; the last entry is the output logit.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut layers: Vec<Vec<f64>> = Vec::with_capacity(self.sizes.len());
        layers.push(input.iter().map(|x| x * self.input_scale).collect());
        let mut offset = 0;
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let prev = &layers[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    b[o] + row.iter().zip(prev).map(|(a, x)| a * x).sum::<f64>()
                })
                .collect();
            let next = if l + 1 < n_layers { z.into_iter().map(|v| v.max(0.0)).collect() } else { z };
            layers.push(next);
            offset += n_in * n_out + n_out;
        }
        layers
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        self.check_input(input)?;
        let layers = self.activations(input);
        Ok(self.head.apply(layers[layers.len() - 1][0]).0)
    }

    /// Forward pass that also adds `grad_out * d(output)/d(params)` into `grad`.
    pub fn forward_backward(&self, input: &[f64], grad_out: f64, grad: &mut [f64]) -> Result<f64> {
        self.check_input(input)?;
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = self.activations(input);
        let n_layers = self.sizes.len() - 1;
        let (out, dhead) = self.head.apply(layers[n_layers][0]);

        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }

        let mut delta = vec![grad_out * dhead];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let a = &layers[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, x) in row.iter_mut().zip(a) {
                    *g += d * x;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (p, wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * wv;
                    }
                }
                // relu derivative from the stored post-activation
                for (p, act) in prev.iter_mut().zip(a) {
                    if *act <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(out)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&ck)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.model.params.len() != param_count(&ck.model.sizes) {
            return Err(Error::SizeMismatch {
                expected: param_count(&ck.model.sizes),
                found: ck.model.params.len(),
            });
        }
        Ok(ck.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSource;

    #[test]
    fn zero_model_outputs_zero() {
        let m = MlpModel::zeros(&[10, 64, 64, 1], Head::Identity).unwrap();
        assert_eq!(m.forward(&[0.3; 10]).unwrap(), 0.0);
        assert!(matches!(m.forward(&[0.0; 9]), Err(Error::SizeMismatch { expected: 10, found: 9 })));
    }

    #[test]
    fn hand_computed_forward() {
        // 2 -> 2 -> 1
        let mut m = MlpModel::zeros(&[2, 2, 1], Head::Identity).unwrap();
        m.params_mut()
            .copy_from_slice(&[1.0, -1.0, 0.5, 2.0, 0.1, -0.2, 3.0, -1.0, 0.25]);
        // x = (1, 2): h1 = relu(1 - 2 + 0.1) = 0, h2 = relu(0.5 + 4 - 0.2) = 4.3
        let out = m.forward(&[1.0, 2.0]).unwrap();
        assert!((out - (3.0 * 0.0 - 1.0 * 4.3 + 0.25)).abs() < 1e-12);
        let scaled = m.clone().with_input_scale(0.5);
        // x = (0.5, 1): h1 = relu(-0.4) = 0, h2 = relu(0.25 + 2 - 0.2) = 2.05
        assert!((scaled.forward(&[1.0, 2.0]).unwrap() - (-2.05 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn squash_head_stays_in_box() {
        let mut st = NoiseSource::new(4).stream(0);
        let m = MlpModel::new(&[3, 8, 1], Head::Squash { lo: -1.0, hi: 1.0 }, &mut st).unwrap();
        for _ in 0..10_000 {
            let x = st.draw(3).iter().map(|v| v * 50.0).collect::<Vec<_>>();
            let y = m.forward(&x).unwrap();
            assert!((-1.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn constant_model_ignores_input() {
        let m = MlpModel::constant(2.5);
        assert_eq!(m.forward(&[1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert_eq!(m.forward(&[]).unwrap(), 2.5);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = MlpModel::new(&[4, 5, 1], Head::Identity, &mut NoiseSource::new(1).stream(0))
            .unwrap()
            .with_input_scale(3.0);
        m.save_json(&path).unwrap();
        assert_eq!(MlpModel::load_json(&path).unwrap(), m);
    }
}
