use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp, NnError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self { config, step: 0, m: Gradients::zeros_like(net), v: Gradients::zeros_like(net) }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. On error the network and state are untouched.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<(), NnError> {
    if !net.shape_matches(grads) || !state.m.same_shape(grads) {
        return Err(NnError::Shape("gradients do not match network/optimizer state".into()));
    }
    if !grads.is_finite() {
        return Err(NnError::NonFinite("gradient".into()));
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step + 1;
    let c1 = 1.0 - beta1.powf(t as f64);
    let c2 = 1.0 - beta2.powf(t as f64);

    let mut m: Vec<&mut f64> = state.m.values_mut().collect();
    let mut v: Vec<&mut f64> = state.v.values_mut().collect();
    net.update_params(grads, |k, p, g| {
        *m[k] = beta1 * *m[k] + (1.0 - beta1) * g;
        *v[k] = beta2 * *v[k] + (1.0 - beta2) * g * g;
        let m_hat = *m[k] / c1;
        let v_hat = *v[k] / c2;
        p - lr * m_hat / (v_hat.sqrt() + eps)
    });
    state.step = t;
    Ok(())
}
