//! Small fully-connected Q-network with hand-rolled backprop and an
//! adaptive-moment optimizer. Keeps the trainer free of ML-framework
//! dependencies and makes the gradients directly checkable against finite
//! differences.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("checkpoint is malformed: {0}")]
    BadCheckpoint(String),
}

/// Dense layer, weights row-major (out x in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        // He initialization for the ReLU stack
        let scale = (2.0 / in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng) * scale)
            .collect();
        Self { in_dim, out_dim, w, b: vec![0.0; out_dim] }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

/// Multilayer perceptron with rectified-linear hidden activations and a
/// linear output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Per-parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct Grads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims
            .windows(2)
            .map(|d| Linear::new(d[0], d[1], rng))
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Zero the output head so the untrained network is exactly indifferent
    /// between actions.
    pub fn zero_output_head(&mut self) {
        let head = self.layers.last_mut().unwrap();
        head.w.iter_mut().for_each(|v| *v = 0.0);
        head.b.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i + 1 < self.layers.len() {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Forward pass keeping post-activation values of every layer input.
    fn forward_cached(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(acts.last().unwrap(), &mut next);
            if i + 1 < self.layers.len() {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(next.clone());
        }
        acts
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            w: self.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: self.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    /// Accumulate gradients for one sample given dL/d(output). Returns the
    /// network output for convenience.
    pub fn accumulate_grads(
        &self,
        x: &[f64],
        d_out: impl FnOnce(&[f64]) -> Vec<f64>,
        grads: &mut Grads,
    ) -> Vec<f64> {
        let acts = self.forward_cached(x);
        let output = acts.last().unwrap().clone();
        let mut delta = d_out(&output);
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[li];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grads.b[li][o] += d;
                let grow = &mut grads.w[li][o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gi, xi) in grow.iter_mut().zip(input) {
                    *gi += d * xi;
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (pi, wi) in prev.iter_mut().zip(row) {
                        *pi += d * wi;
                    }
                }
                // ReLU mask: the cached value is post-activation
                for (pi, ai) in prev.iter_mut().zip(input) {
                    if *ai <= 0.0 {
                        *pi = 0.0;
                    }
                }
                delta = prev;
            }
        }
        output
    }

    /// Serialize to the versioned textual checkpoint format: layer shapes
    /// plus row-major weights.
    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(&CheckpointFile { version: 1, network: self.clone() })
            .expect("network serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, NnError> {
        let file: CheckpointFile = serde_json::from_str(text)
            .map_err(|e| NnError::BadCheckpoint(e.to_string()))?;
        if file.version != 1 {
            return Err(NnError::BadCheckpoint(format!(
                "unsupported checkpoint version {}",
                file.version
            )));
        }
        for l in &file.network.layers {
            if l.w.len() != l.in_dim * l.out_dim || l.b.len() != l.out_dim {
                return Err(NnError::BadCheckpoint("layer shape mismatch".into()));
            }
        }
        Ok(file.network)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    network: Mlp,
}

/// Adaptive moment estimation with bias correction and global-norm gradient
/// clipping.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    t: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64, clip_norm: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm,
            t: 0,
            m_w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            v_w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            m_b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
            v_b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &mut Grads) {
        // global-norm clip
        let norm: f64 = grads
            .w
            .iter()
            .flatten()
            .chain(grads.b.iter().flatten())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        if norm > self.clip_norm && norm > 0.0 {
            let scale = self.clip_norm / norm;
            grads.w.iter_mut().flatten().for_each(|g| *g *= scale);
            grads.b.iter_mut().flatten().for_each(|g| *g *= scale);
        }

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let update = |param: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for i in 0..param.len() {
                    m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                    v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                    let mhat = m[i] / bc1;
                    let vhat = v[i] / bc2;
                    param[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
                }
            };
            update(&mut layer.w, &grads.w[li], &mut self.m_w[li], &mut self.v_w[li]);
            update(&mut layer.b, &grads.b[li], &mut self.m_b[li], &mut self.v_b[li]);
        }
    }
}
