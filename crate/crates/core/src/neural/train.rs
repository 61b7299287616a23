use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, one_hot_matrix, AdamState, FnnModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
            init_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::invalid("adam betas must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::invalid("learning_rate and epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Sample-weighted mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

/// Mean cross-entropy of `labels` under the model, evaluated in chunks.
fn mean_loss(model: &FnnModel, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    let mut offset = 0;
    for chunk in x.axis_chunks_iter(Axis(0), 4096) {
        let p = model.forward(chunk)?;
        for (row, &l) in p.rows().into_iter().zip(&labels[offset..]) {
            total -= row[l].ln();
        }
        offset += chunk.nrows();
    }
    Ok(total / labels.len() as f64)
}

/// Run exactly `cfg.epochs` epochs of shuffled mini-batch Adam and return the
/// final-epoch parameters. No early stopping.
pub fn train(
    mut model: FnnModel,
    train_x: ArrayView2<f64>,
    train_labels: &[usize],
    validation: Option<(ArrayView2<f64>, &[usize])>,
    cfg: &TrainConfig,
) -> Result<FnnModel> {
    cfg.validate()?;
    let n = train_x.nrows();
    if n == 0 || n != train_labels.len() {
        return Err(Error::DimensionMismatch { expected: n, got: train_labels.len() });
    }
    if train_x.ncols() != model.arch.input_dim {
        return Err(Error::DimensionMismatch { expected: model.arch.input_dim, got: train_x.ncols() });
    }
    let k = model.arch.output_dim;
    if let Some(&bad) = train_labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} outside the {k}-class output layer")));
    }

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut state = AdamState::new(&model);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xb: Array2<f64> = train_x.select(Axis(0), idx);
            let labels: Vec<usize> = idx.iter().map(|&i| train_labels[i]).collect();
            let yb = one_hot_matrix(&labels, k)?;
            let (loss, grad) = match model.loss_and_grad(xb.view(), yb.view()) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => return Err(Error::Divergence { epoch, batch: batch_no, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_no, loss });
            }
            epoch_loss += loss * idx.len() as f64;
            let step = model.optimizer_steps + 1;
            adam_step(&mut model, &grad, &mut state, step, cfg)?;
        }
        let validation_loss = match validation {
            Some((vx, vl)) if vx.nrows() > 0 => Some(mean_loss(&model, vx, vl)?),
            _ => None,
        };
        model.history.push(EpochLoss { epoch, train_loss: epoch_loss / n as f64, validation_loss });
    }
    model.fit_wall_time = start.elapsed().as_secs_f64();
    Ok(model)
}
