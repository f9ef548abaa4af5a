//! Small feed-forward scorer: sigmoid hidden layers, linear head of width L.
//! Parameters live in one flat vector so the optimizer can treat them uniformly.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "vlpl-scorer";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    #[serde(default = "yes")]
    pub head_bias: bool,
}

fn yes() -> bool {
    true
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Config("scorer needs nonzero input and output width".into()));
        }
        if hidden.len() > 5 {
            return Err(Error::Config(format!("at most 5 hidden layers, got {}", hidden.len())));
        }
        if hidden.contains(&0) {
            return Err(Error::Config("hidden layer of width 0".into()));
        }
        Ok(Self {
            input_dim,
            hidden,
            output_dim,
            head_bias: true,
        })
    }

    /// Drops the output-layer bias, so a one-hot linear scorer has exactly
    /// one weight per (d, l).
    pub fn without_head_bias(mut self) -> Self {
        self.head_bias = false;
        self
    }

    fn bias_len(&self, layer: usize, n_out: usize) -> usize {
        if layer == self.hidden.len() && !self.head_bias {
            0
        } else {
            n_out
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(self.output_dim);
        w
    }

    pub fn num_params(&self) -> usize {
        self.widths()
            .windows(2)
            .enumerate()
            .map(|(k, w)| w[0] * w[1] + self.bias_len(k, w[1]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub arch: Architecture,
    pub dropout: f64,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs, after dropout; `acts[0]` is the feature vector.
    acts: Vec<Vec<f64>>,
    /// Sigmoid outputs before dropout, per hidden layer.
    sig: Vec<Vec<f64>>,
    /// Dropout multipliers per hidden layer (empty when dropout is off).
    masks: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    scorer: Scorer,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Scorer {
    /// Xavier-uniform weights, zero biases.
    pub fn new(arch: Architecture, dropout: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout {dropout} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(arch.num_params());
        for (k, w) in arch.widths().windows(2).enumerate() {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, arch.bias_len(k, w[1])));
        }
        Ok(Self { arch, dropout, params })
    }

    /// All-zero parameters; the output is zero for every input.
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.num_params();
        Self {
            arch,
            dropout: 0.0,
            params: vec![0.0; n],
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(features, None)?.output)
    }

    /// Forward pass. Dropout is applied to hidden activations only when an
    /// RNG is passed and the rate is positive.
    pub fn forward_cached(&self, features: &[f64], rng: Option<&mut ChaCha8Rng>) -> Result<ForwardCache> {
        if features.len() != self.arch.input_dim {
            return Err(Error::Dimension {
                expected: self.arch.input_dim,
                got: features.len(),
            });
        }
        let widths = self.arch.widths();
        let layers = widths.len() - 1;
        let mut rng = rng.filter(|_| self.dropout > 0.0);
        let keep = 1.0 - self.dropout;
        let mut acts = vec![features.to_vec()];
        let mut sig = Vec::new();
        let mut masks = Vec::new();
        let mut offset = 0;
        let mut output = Vec::new();
        for k in 0..layers {
            let (n_in, n_out) = (widths[k], widths[k + 1]);
            let nb = self.arch.bias_len(k, n_out);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + nb];
            offset += n_in * n_out + nb;
            let x = acts.last().unwrap();
            let z: Vec<f64> = (0..n_out)
                .map(|o| b.get(o).copied().unwrap_or(0.0) + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
                .collect();
            if k + 1 == layers {
                output = z;
                break;
            }
            let s: Vec<f64> = z.into_iter().map(sigmoid).collect();
            let next = match rng.as_deref_mut() {
                Some(r) => {
                    let m: Vec<f64> = (0..n_out).map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                    let out = s.iter().zip(&m).map(|(a, b)| a * b).collect();
                    masks.push(m);
                    out
                }
                None => s.clone(),
            };
            sig.push(s);
            acts.push(next);
        }
        Ok(ForwardCache {
            acts,
            sig,
            masks,
            output,
        })
    }

    /// Adds d(upstream . output)/d(params) into `grads`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut [f64]) {
        assert_eq!(upstream.len(), self.arch.output_dim);
        assert_eq!(grads.len(), self.params.len());
        let widths = self.arch.widths();
        let layers = widths.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for k in 0..layers {
            offsets.push(off);
            off += widths[k] * widths[k + 1] + self.arch.bias_len(k, widths[k + 1]);
        }
        let mut delta = upstream.to_vec();
        for k in (0..layers).rev() {
            let (n_in, n_out) = (widths[k], widths[k + 1]);
            let o = offsets[k];
            let x = &cache.acts[k];
            for j in 0..n_out {
                let row = &mut grads[o + j * n_in..o + (j + 1) * n_in];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += delta[j] * v;
                }
                if self.arch.bias_len(k, n_out) > 0 {
                    grads[o + n_in * n_out + j] += delta[j];
                }
            }
            if k == 0 {
                break;
            }
            let w = &self.params[o..o + n_in * n_out];
            let s = &cache.sig[k - 1];
            let mask = cache.masks.get(k - 1);
            delta = (0..n_in)
                .map(|i| {
                    let back: f64 = (0..n_out).map(|j| w[j * n_in + i] * delta[j]).sum();
                    let m = mask.map_or(1.0, |m| m[i]);
                    back * m * s[i] * (1.0 - s[i])
                })
                .collect();
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scorer: self.clone(),
        };
        serde_json::to_string_pretty(&ck).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        let s = ck.scorer;
        if s.params.len() != s.arch.num_params() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                s.arch.num_params(),
                s.params.len()
            )));
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
