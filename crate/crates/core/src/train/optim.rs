use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::nn::{Gradients, NnError, Parameters};

/// Optimization and stopping hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict accuracy improvement before stopping.
    pub patience: usize,
    pub max_grad_norm: f64,
    /// Coupled L2 coefficient, applied to weight matrices only.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            max_epochs: 100,
            patience: 5,
            max_grad_norm: 5.0,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, epochs and patience must be positive");
        }
        if self.patience > self.max_epochs {
            return bad("patience exceeds max_epochs");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max gradient norm must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        Ok(())
    }
}

/// Scales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// First and second moment estimates with the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Parameters,
    pub v: Parameters,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        let mut zeros = params.clone();
        zeros.scale(0.0);
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// One Adam update with coupled weight decay on decaying tensors.
pub fn adam_step(
    params: &mut Parameters,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &TrainingConfig,
) -> Result<(), TrainError> {
    if !params.same_layout(grads) || !params.same_layout(&state.m) {
        return Err(NnError::ShapeMismatch("optimizer tensors do not match the parameters".into()).into());
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let correct1 = 1.0 - b1.powi(t);
    let correct2 = 1.0 - b2.powi(t);

    // Decayed gradient per tensor, then moments.
    let mut effective = grads.clone();
    effective.zip_mut_with(params, |info, mut g, p| {
        if info.role.decays() && cfg.weight_decay != 0.0 {
            g.zip_mut_with(&p, |g, &p| *g += cfg.weight_decay * p);
        }
    });
    state.m.zip_mut_with(&effective, |_, mut m, g| m.zip_mut_with(&g, |m, &g| *m = b1 * *m + (1.0 - b1) * g));
    state.v.zip_mut_with(&effective, |_, mut v, g| v.zip_mut_with(&g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g));

    let mut step = state.m.clone();
    step.zip_mut_with(&state.v, |_, mut m, v| {
        m.zip_mut_with(&v, |m, &v| *m = cfg.learning_rate * (*m / correct1) / ((v / correct2).sqrt() + cfg.epsilon))
    });
    params.zip_mut_with(&step, |_, mut p, s| p.zip_mut_with(&s, |p, &s| *p -= s));

    if !params.is_finite() {
        return Err(NnError::NonFiniteDetected("parameters after update".into()).into());
    }
    Ok(())
}
