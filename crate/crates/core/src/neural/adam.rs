use ndarray::Zip;

use super::{FnnModel, Gradients, TrainConfig};
use crate::error::{Error, Result};

/// First and second moment accumulators, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(model: &FnnModel) -> Self {
        AdamState { m: Gradients::zeros_like(model), v: Gradients::zeros_like(model) }
    }
}

fn update(param: f64, m: &mut f64, v: &mut f64, g: f64, cfg: &TrainConfig, c1: f64, c2: f64) -> f64 {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / c1;
    let v_hat = *v / c2;
    param - cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon)
}

/// Apply Adam update number `step` (1-based) in place.
pub fn adam_step(
    model: &mut FnnModel,
    grad: &Gradients,
    state: &mut AdamState,
    step: u64,
    cfg: &TrainConfig,
) -> Result<()> {
    if step == 0 {
        return Err(Error::invalid("adam step count starts at 1"));
    }
    let shapes_match = grad.weights.len() == model.weights.len()
        && grad.weights.iter().zip(&model.weights).all(|(g, w)| g.dim() == w.dim())
        && grad.biases.iter().zip(&model.biases).all(|(g, b)| g.dim() == b.dim());
    if !shapes_match {
        return Err(Error::invalid("gradient shapes do not match the model"));
    }
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for l in 0..model.weights.len() {
        Zip::from(&mut model.weights[l])
            .and(&mut state.m.weights[l])
            .and(&mut state.v.weights[l])
            .and(&grad.weights[l])
            .for_each(|p, m, v, &g| *p = update(*p, m, v, g, cfg, c1, c2));
        Zip::from(&mut model.biases[l])
            .and(&mut state.m.biases[l])
            .and(&mut state.v.biases[l])
            .and(&grad.biases[l])
            .for_each(|p, m, v, &g| *p = update(*p, m, v, g, cfg, c1, c2));
    }
    model.optimizer_steps += 1;
    Ok(())
}
