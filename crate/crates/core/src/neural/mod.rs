//! Fully connected softmax classifier with rectified-linear hidden layers,
//! categorical cross-entropy loss and hand-written backpropagation.
//!
//! Weights are stored `fan_in × fan_out` so a batch `X` (rows are samples)
//! propagates as `X·W + b`.

mod adam;
mod checkpoint;
mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use checkpoint::CHECKPOINT_FORMAT_VERSION;
pub use train::{train, EpochLoss, TrainConfig};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 3] = [1000, 500, 300];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnnArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl FnnArchitecture {
    /// `2N → 1000 → 500 → 300 → 3^N`.
    pub fn for_qubits(n_qubits: usize) -> Self {
        FnnArchitecture {
            input_dim: 2 * n_qubits,
            hidden: DEFAULT_HIDDEN.to_vec(),
            output_dim: crate::num_states(n_qubits),
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden);
        w.push(self.output_dim);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths().contains(&0) {
            return Err(Error::invalid("all layer widths must be at least 1"));
        }
        Ok(())
    }
}

/// Parameter-shaped container: used both for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &FnnModel) -> Self {
        Gradients {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    pub arch: FnnArchitecture,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub history: Vec<EpochLoss>,
    /// Adam updates applied so far.
    pub optimizer_steps: u64,
    /// Not persisted.
    pub fit_wall_time: f64,
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
}

fn relu_inplace(z: &mut Array2<f64>) {
    z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
}

/// Pre-activations of every layer and the post-ReLU hidden activations.
struct Trace {
    /// `activations[0]` is the input; `activations[l]` feeds layer `l`.
    activations: Vec<Array2<f64>>,
    logits: Array2<f64>,
}

impl FnnModel {
    /// Fan-in scaled normal weights (variance `2 / fan_in`), zero biases.
    pub fn init(arch: FnnArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = arch.widths();
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            weights.push(Array2::from_shape_simple_fn((fan_in, fan_out), || normal.sample(&mut rng)));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(FnnModel { arch, weights, biases, history: Vec::new(), optimizer_steps: 0, fit_wall_time: 0.0 })
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.arch.input_dim {
            return Err(Error::DimensionMismatch { expected: self.arch.input_dim, got: batch.ncols() });
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    fn check_params(&self) -> Result<()> {
        let bad = self.weights.iter().any(|w| w.iter().any(|v| !v.is_finite()))
            || self.biases.iter().any(|b| b.iter().any(|v| !v.is_finite()));
        if bad {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(())
    }

    fn trace(&self, batch: ArrayView2<f64>) -> Trace {
        let last = self.n_layers() - 1;
        let mut activations = Vec::with_capacity(self.n_layers());
        activations.push(batch.to_owned());
        for l in 0..last {
            let mut z = activations[l].dot(&self.weights[l]) + &self.biases[l];
            relu_inplace(&mut z);
            activations.push(z);
        }
        let logits = activations[last].dot(&self.weights[last]) + &self.biases[last];
        Trace { activations, logits }
    }

    /// Class probabilities, one softmax row per input row.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        self.check_params()?;
        let mut out = self.trace(batch).logits;
        softmax_rows(&mut out);
        Ok(out)
    }

    /// Mean categorical cross-entropy against one-hot `targets` and its gradient.
    pub fn loss_and_grad(&self, batch: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Gradients)> {
        self.check_input(&batch)?;
        if targets.nrows() != batch.nrows() || targets.ncols() != self.arch.output_dim {
            return Err(Error::DimensionMismatch { expected: self.arch.output_dim, got: targets.ncols() });
        }
        let b = batch.nrows() as f64;
        let Trace { activations, logits } = self.trace(batch);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("activations"));
        }

        // log-softmax, then loss and dL/dlogits = (p − y) / B
        let mut loss = 0.0;
        let mut delta = logits;
        Zip::from(delta.rows_mut()).and(targets.rows()).for_each(|mut z, y| {
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for (zi, yi) in z.iter_mut().zip(y) {
                let log_p = *zi - lse;
                if *yi != 0.0 {
                    loss -= yi * log_p;
                }
                *zi = (log_p.exp() - yi) / b;
            }
        });
        loss /= b;

        let mut grads =
            Gradients { weights: Vec::with_capacity(self.n_layers()), biases: Vec::with_capacity(self.n_layers()) };
        for l in (0..self.n_layers()).rev() {
            grads.weights.push(activations[l].t().dot(&delta));
            grads.biases.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                Zip::from(&mut back).and(&activations[l]).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        grads.weights.reverse();
        grads.biases.reverse();
        Ok((loss, grads))
    }

    /// Argmax of [`forward`](Self::forward); ties go to the smallest class.
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Vec<usize>> {
        let p = self.forward(features)?;
        Ok(p.rows().into_iter().map(|r| argmax_row(r.as_slice().unwrap())).collect())
    }

    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        let x = rows_to_array(rows, self.arch.input_dim)?;
        // keep memory bounded for large evaluation sets
        let mut out = Vec::with_capacity(rows.len());
        for chunk in x.axis_chunks_iter(Axis(0), 4096) {
            out.extend(self.predict(chunk)?);
        }
        Ok(out)
    }
}

pub(crate) fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn rows_to_array(rows: &[Vec<f64>], dim: usize) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        flat.extend_from_slice(r);
    }
    Ok(Array2::from_shape_vec((rows.len(), dim), flat).expect("shape checked"))
}

/// One-hot matrix for class indices.
pub fn one_hot_matrix(labels: &[usize], num_classes: usize) -> Result<Array2<f64>> {
    let mut y = Array2::zeros((labels.len(), num_classes));
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::invalid(format!("label {l} out of range for {num_classes} classes")));
        }
        y[[i, l]] = 1.0;
    }
    Ok(y)
}
