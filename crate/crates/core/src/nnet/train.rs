use serde::{Deserialize, Serialize};

use super::loss::{dice_ce_logits, mse_loss};
use super::mlp::{Gradients, MlpParams};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd {
        momentum: f64,
    },
    Adamw {
        beta1: f64,
        beta2: f64,
        eps: f64,
        weight_decay: f64,
    },
}

impl Optimizer {
    pub fn adamw_default() -> Self {
        Optimizer::Adamw {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    /// Output unit is a logit; the loss applies a sigmoid first.
    DiceCe { lambda_mix: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub loss: LossKind,
    /// Early stopping on validation loss; ignored without a validation set.
    /// Absent from a config document means no early stopping.
    #[serde(default)]
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            optimizer: Optimizer::adamw_default(),
            loss: LossKind::Mse,
            patience: Some(5),
        }
    }
}

impl TrainConfig {
    /// Checks used when a configuration is loaded from disk. `train` itself
    /// accepts zero epochs and a zero learning rate.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if let LossKind::DiceCe { lambda_mix } = self.loss {
            if !(0.0..=1.0).contains(&lambda_mix) {
                return Err(Error::config("lambda_mix", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Row-major input/target table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    input_dim: usize,
    target_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(input_dim: usize, target_dim: usize) -> Self {
        Self {
            input_dim,
            target_dim,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &[f64], target: &[f64]) -> Result<()> {
        if input.len() != self.input_dim || target.len() != self.target_dim {
            return Err(Error::DimensionMismatch(format!(
                "sample has {}+{} values, dataset expects {}+{}",
                input.len(),
                target.len(),
                self.input_dim,
                self.target_dim
            )));
        }
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
        Ok(())
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.input_dim != self.input_dim || other.target_dim != self.target_dim {
            return Err(Error::DimensionMismatch("datasets have different widths".into()));
        }
        self.inputs.extend_from_slice(&other.inputs);
        self.targets.extend_from_slice(&other.targets);
        Ok(())
    }

    pub fn len(&self) -> usize {
        if self.input_dim == 0 {
            0
        } else {
            self.inputs.len() / self.input_dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.target_dim..(i + 1) * self.target_dim]
    }

    /// Deterministic split into (train, validation) by shuffled index.
    pub fn split(&self, val_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        Rng::new(seed).shuffle(&mut idx);
        let n_val = ((n as f64) * val_fraction).round() as usize;
        let mut train = Dataset::new(self.input_dim, self.target_dim);
        let mut val = Dataset::new(self.input_dim, self.target_dim);
        for (k, &i) in idx.iter().enumerate() {
            let dst = if k < n_val { &mut val } else { &mut train };
            dst.inputs.extend_from_slice(self.input(i));
            dst.targets.extend_from_slice(self.target(i));
        }
        (train, val)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: MlpParams,
    pub report: TrainReport,
}

/// Per-parameter optimizer memory.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    optimizer: Optimizer,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, params: &MlpParams) -> Self {
        let shape: Vec<Vec<f64>> = params
            .weights()
            .iter()
            .chain(params.biases())
            .map(|v| vec![0.0; v.len()])
            .collect();
        Self {
            optimizer,
            step: 0,
            first: shape.clone(),
            second: shape,
        }
    }

    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients, lr: f64) {
        self.step += 1;
        let layers = params.layer_count();
        let t = self.step as i32;
        for block in 0..2 * layers {
            let (theta, g) = if block < layers {
                (&mut params.weights_mut()[block], &grads.weights[block])
            } else {
                (&mut params.biases_mut()[block - layers], &grads.biases[block - layers])
            };
            let m = &mut self.first[block];
            match self.optimizer {
                Optimizer::Sgd { momentum } => {
                    for i in 0..theta.len() {
                        m[i] = momentum * m[i] + g[i];
                        theta[i] -= lr * m[i];
                    }
                }
                Optimizer::Adamw {
                    beta1,
                    beta2,
                    eps,
                    weight_decay,
                } => {
                    let v = &mut self.second[block];
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..theta.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = if c2 > 0.0 { v[i] / c2 } else { v[i] };
                        theta[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * theta[i]);
                    }
                }
            }
        }
    }
}

fn batch_loss(params: &MlpParams, loss: LossKind, x: &[f64], y: &[f64], n: usize) -> Result<(f64, Vec<f64>, super::mlp::BatchCache)> {
    let cache = params.forward_batch(x, n)?;
    let (l, g) = match loss {
        LossKind::Mse => mse_loss(cache.output(), y)?,
        LossKind::DiceCe { lambda_mix } => dice_ce_logits(cache.output(), y, lambda_mix)?,
    };
    Ok((l, g, cache))
}

/// Mean loss over a dataset in batches, with no parameter updates.
pub fn evaluate_loss(params: &MlpParams, data: &Dataset, loss: LossKind, batch_size: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation set is empty".into()));
    }
    let bs = batch_size.max(1);
    let mut total = 0.0;
    let mut start = 0;
    while start < data.len() {
        let end = (start + bs).min(data.len());
        let n = end - start;
        let x = &data.inputs[start * data.input_dim..end * data.input_dim];
        let y = &data.targets[start * data.target_dim..end * data.target_dim];
        let (l, _, _) = batch_loss(params, loss, x, y, n)?;
        total += l * n as f64;
        start = end;
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch training. The returned parameters lie on the f32 grid.
pub fn train(params: &MlpParams, data: &Dataset, val: Option<&Dataset>, cfg: &TrainConfig) -> Result<Trained> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    if data.input_dim != params.input_dim() || data.target_dim != params.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dataset is {}->{}, network is {}->{}",
            data.input_dim,
            data.target_dim,
            params.input_dim(),
            params.output_dim()
        )));
    }
    let val = val.filter(|v| !v.is_empty());
    let bs = cfg.batch_size.max(1);
    let mut rng = Rng::new(cfg.seed);
    let mut current = params.clone();
    let mut state = OptimizerState::new(cfg.optimizer, &current);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, MlpParams)> = None;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut xb = Vec::with_capacity(bs * data.input_dim);
    let mut yb = Vec::with_capacity(bs * data.target_dim);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for (batch_idx, chunk) in order.chunks(bs).enumerate() {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(data.input(i));
                yb.extend_from_slice(data.target(i));
            }
            let (l, g, cache) = batch_loss(&current, cfg.loss, &xb, &yb, chunk.len())?;
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            total += l * chunk.len() as f64;
            if cfg.learning_rate != 0.0 {
                let grads = current.backward_batch(&cache, &g)?;
                state.step(&mut current, &grads, cfg.learning_rate);
            }
        }
        let train_loss = total / data.len() as f64;
        let val_loss = match val {
            Some(v) => Some(evaluate_loss(&current, v, cfg.loss, bs)?),
            None => None,
        };
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:?}");
        history.push(EpochLoss {
            epoch,
            train: train_loss,
            val: val_loss,
        });
        if let Some(vl) = val_loss {
            if !vl.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: 0 });
            }
            let improved = best.as_ref().map_or(true, |(b, _, _)| vl < *b);
            if improved {
                best = Some((vl, epoch, current.clone()));
            } else if let (Some(patience), Some((_, best_epoch, _))) = (cfg.patience, &best) {
                if epoch - best_epoch >= patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let best_epoch = best.as_ref().map(|(_, e, _)| *e);
    let mut out = match (cfg.patience, best) {
        (Some(_), Some((_, _, p))) => p,
        _ => current,
    };
    out.round_to_f32();
    Ok(Trained {
        params: out,
        report: TrainReport {
            history,
            best_epoch,
            stopped_early,
        },
    })
}
