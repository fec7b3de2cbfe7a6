use serde::{Deserialize, Serialize};

use crate::model::ModelParameters;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Bias-corrected Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    Adam,
    Sgd,
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParameters,
    pub v: ModelParameters,
    pub t: u64,
}

impl AdamState {
    pub fn new(like: &ModelParameters) -> Self {
        AdamState {
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
        }
    }
}

pub fn adam_step(params: &mut ModelParameters, grads: &ModelParameters, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    let mut m = state.m.slices_mut();
    let mut v = state.v.slices_mut();
    for (k, (p, g)) in params.slices_mut().into_iter().zip(grads.slices()).enumerate() {
        let (mk, vk) = (&mut *m[k], &mut *v[k]);
        for i in 0..p.len() {
            let gi = g[i];
            mk[i] = ADAM_BETA1 * mk[i] + (1.0 - ADAM_BETA1) * gi;
            vk[i] = ADAM_BETA2 * vk[i] + (1.0 - ADAM_BETA2) * gi * gi;
            if mk[i] != 0.0 {
                let m_hat = mk[i] / bc1;
                let v_hat = vk[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
    }
}

pub fn sgd_step(params: &mut ModelParameters, grads: &ModelParameters, lr: f64) {
    for (p, g) in params.slices_mut().into_iter().zip(grads.slices()) {
        for (pi, gi) in p.iter_mut().zip(g) {
            *pi -= lr * gi;
        }
    }
}

/// Per-scope optimizer state.
#[derive(Debug, Clone)]
pub enum OptimizerState {
    Adam(AdamState),
    Sgd,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, like: &ModelParameters) -> Self {
        match kind {
            Optimizer::Adam => OptimizerState::Adam(AdamState::new(like)),
            Optimizer::Sgd => OptimizerState::Sgd,
        }
    }

    pub fn step(&mut self, params: &mut ModelParameters, grads: &ModelParameters, lr: f64) {
        match self {
            OptimizerState::Adam(s) => adam_step(params, grads, s, lr),
            OptimizerState::Sgd => sgd_step(params, grads, lr),
        }
    }
}
