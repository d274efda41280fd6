//! Fully-connected network with one hidden activation and identity output.
//!
//! Weights of layer `l` form a `dims[l+1] × dims[l]` row-major matrix. All
//! arithmetic is `f64`; [`MlpParams::round_to_f32`] snaps parameters to the
//! 32-bit grid used on disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// Post-activation values of every layer for a batch; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct BatchCache {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl BatchCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output, `batch × output_dim` row-major.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }
}

/// Gradients summed over the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Gradient with respect to the input, `batch × input_dim`.
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            input: Vec::new(),
        }
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::config(
            "layer_dims",
            format!("need at least two positive sizes, got {dims:?}"),
        ));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl MlpParams {
    /// Scaled-uniform init (±√(6/(fan_in+fan_out))), zero biases, on the f32 grid.
    pub fn init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = Rng::new(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| f64::from(rng.uniform_range(-limit, limit) as f32))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        check_dims(layer_dims)?;
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims
                .windows(2)
                .map(|p| vec![0.0; p[0] * p[1]])
                .collect(),
            biases: layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
            activation,
        })
    }

    pub fn from_parts(
        layer_dims: Vec<usize>,
        activation: Activation,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::DimensionMismatch(format!(
                "{layers} layers declared, {} weight and {} bias blocks given",
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..layers {
            let (i, o) = (layer_dims[l], layer_dims[l + 1]);
            if weights[l].len() != i * o || biases[l].len() != o {
                return Err(Error::DimensionMismatch(format!(
                    "layer {l}: expected {o}x{i} weights and {o} biases, got {} and {}",
                    weights[l].len(),
                    biases[l].len()
                )));
            }
        }
        let params = Self {
            layer_dims,
            weights,
            biases,
            activation,
        };
        if !params.all_finite() {
            return Err(Error::InvalidImage("non-finite network parameter".into()));
        }
        Ok(params)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }

    pub fn layer_count(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Storage size as 32-bit values.
    pub fn param_bytes(&self) -> usize {
        4 * self.param_count()
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .all(|v| v.is_finite())
    }

    pub fn round_to_f32(&mut self) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()).flatten() {
            *v = f64::from(*v as f32);
        }
    }

    /// Forward pass over `batch` rows of `inputs` (row-major).
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<BatchCache> {
        let in_dim = self.input_dim();
        if inputs.len() != batch * in_dim {
            return Err(Error::DimensionMismatch(format!(
                "input holds {} values, expected {batch} x {in_dim}",
                inputs.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.layer_dims.len());
        acts.push(inputs.to_vec());
        let layers = self.layer_count();
        for l in 0..layers {
            let (i_dim, o_dim) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let bias = &self.biases[l];
            let x = &acts[l];
            let mut y = vec![0.0; batch * o_dim];
            let act = if l + 1 == layers {
                Activation::Identity
            } else {
                self.activation
            };
            for b in 0..batch {
                let xb = &x[b * i_dim..(b + 1) * i_dim];
                let yb = &mut y[b * o_dim..(b + 1) * o_dim];
                for o in 0..o_dim {
                    let z = dot(&w[o * i_dim..(o + 1) * i_dim], xb) + bias[o];
                    yb[o] = act.apply(z);
                }
            }
            acts.push(y);
        }
        Ok(BatchCache { batch, acts })
    }

    pub fn forward(&self, input: &[f64]) -> Result<BatchCache> {
        self.forward_batch(input, 1)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output().to_vec())
    }

    /// Reverse-mode gradients for upstream `dL/d(output)` (`batch × output_dim`).
    pub fn backward_batch(&self, cache: &BatchCache, upstream: &[f64]) -> Result<Gradients> {
        let batch = cache.batch;
        let layers = self.layer_count();
        if upstream.len() != batch * self.output_dim() || cache.acts.len() != layers + 1 {
            return Err(Error::DimensionMismatch(format!(
                "upstream gradient holds {} values, expected {batch} x {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.to_vec();
        for l in (0..layers).rev() {
            let (i_dim, o_dim) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let x = &cache.acts[l];
            let w = &self.weights[l];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            let mut dx = vec![0.0; batch * i_dim];
            for b in 0..batch {
                let xb = &x[b * i_dim..(b + 1) * i_dim];
                let dxb = &mut dx[b * i_dim..(b + 1) * i_dim];
                for o in 0..o_dim {
                    let d = delta[b * o_dim + o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    axpy(d, xb, &mut gw[o * i_dim..(o + 1) * i_dim]);
                    axpy(d, &w[o * i_dim..(o + 1) * i_dim], dxb);
                }
            }
            if l > 0 {
                for (g, &a) in dx.iter_mut().zip(x) {
                    *g *= self.activation.derivative_from_output(a);
                }
            }
            delta = dx;
        }
        grads.input = delta;
        Ok(grads)
    }

    pub fn backward(&self, cache: &BatchCache, upstream: &[f64]) -> Result<Gradients> {
        self.backward_batch(cache, upstream)
    }
}
