//! Adam with L2 weight decay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diff::{ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// `lr / sqrt(t)`.
    InvSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
    /// Apply decay directly to the weights (AdamW) instead of adding it to
    /// the gradient.
    pub decoupled: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            weight_decay: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule: LrSchedule::Constant,
            decoupled: false,
        }
    }
}

/// Moment estimates for every parameter of one store.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = |p: &Tensor| Tensor::zeros(p.rows(), p.cols());
        let m: BTreeMap<_, _> = params
            .iter()
            .map(|(k, p)| (k.to_string(), zeros(&p.value)))
            .collect();
        AdamState {
            config,
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update from the gradients in `params`; gradients are zeroed after.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::Contract(format!(
            "optimizer state tracks {} parameters, store has {}",
            state.m.len(),
            params.len()
        )));
    }
    state.t += 1;
    let c = state.config;
    let t = state.t as f64;
    let lr = match c.schedule {
        LrSchedule::Constant => c.lr,
        LrSchedule::InvSqrt => c.lr / t.sqrt(),
    };
    let bc1 = 1.0 - c.beta1.powf(t);
    let bc2 = 1.0 - c.beta2.powf(t);
    for (name, p) in params.iter_mut() {
        let (Some(m), Some(v)) = (state.m.get_mut(name), state.v.get_mut(name)) else {
            return Err(Error::Contract(format!(
                "optimizer state was not initialized for '{name}'"
            )));
        };
        let value = p.value.data_mut();
        for i in 0..value.len() {
            let mut g = p.grad.data()[i];
            if !c.decoupled {
                g += c.weight_decay * value[i];
            }
            let mi = c.beta1 * m.data()[i] + (1.0 - c.beta1) * g;
            let vi = c.beta2 * v.data()[i] + (1.0 - c.beta2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let update = lr * (mi / bc1) / ((vi / bc2).sqrt() + c.eps);
            if c.decoupled {
                value[i] -= lr * c.weight_decay * value[i];
            }
            value[i] -= update;
        }
    }
    params.zero_grad();
    Ok(())
}

/// Global L2 norm over every gradient slot.
pub fn grad_norm(params: &ParamStore) -> f64 {
    params
        .iter()
        .flat_map(|(_, p)| p.grad.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}
