//! Dense feed-forward networks with analytic backpropagation and Adam.

mod adam;
mod mlp;
mod persist;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{Activation, DenseLayer, ForwardCache, Gradients, LayerGradient, Mlp};
pub use persist::{ModelFile, MODEL_FORMAT_HEADER};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("forward cache does not belong to the current network state")]
    StaleCache,
    #[error("model format: {0}")]
    Format(String),
}

/// Mean squared error and its gradient `2(pred − target)/n`.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(NnError::Dimension { expected: target.len(), found: pred.len() });
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = p - t;
            loss += e * e;
            2.0 * e / n
        })
        .collect();
    Ok((loss / n, grad))
}
