use serde::{Deserialize, Serialize};

use super::tensor::Parameterized;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaConfig {
    /// Decay of the running averages.
    pub rho: f64,
    pub eps: f64,
    /// Multiplier on the computed update.
    pub lr: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        AdadeltaConfig {
            rho: 0.95,
            eps: 1e-6,
            lr: 1.0,
        }
    }
}

/// Adadelta with per-coordinate running averages of squared gradients and
/// squared updates:
///
/// ```text
/// E[g²] ← ρ E[g²] + (1-ρ) g²
/// Δ     = -√(E[Δ²] + ε) / √(E[g²] + ε) · g
/// E[Δ²] ← ρ E[Δ²] + (1-ρ) Δ²
/// x     ← x + lr·Δ
/// ```
///
/// Rows of tensors marked with sparse rows are skipped entirely when their
/// gradient is zero, as with sparse embedding updates.
#[derive(Clone, Debug)]
pub struct Adadelta {
    config: AdadeltaConfig,
    sq_grad: Vec<Vec<f64>>,
    sq_update: Vec<Vec<f64>>,
}

impl Adadelta {
    pub fn new(config: AdadeltaConfig) -> Self {
        Adadelta {
            config,
            sq_grad: Vec::new(),
            sq_update: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdadeltaConfig {
        &self.config
    }

    /// Running averages (E[g²], E[Δ²]) per parameter tensor.
    pub fn state(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.sq_grad, &self.sq_update)
    }

    /// Applies one update from the accumulated gradients, then clears them.
    pub fn step<P: Parameterized + ?Sized>(&mut self, model: &mut P) -> Result<()> {
        let AdadeltaConfig { rho, eps, lr } = self.config;
        let mut params = model.params_mut();
        if self.sq_grad.is_empty() {
            self.sq_grad = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.sq_update = self.sq_grad.clone();
        }
        if self.sq_grad.len() != params.len() {
            return Err(Error::shape(self.sq_grad.len(), params.len()));
        }
        for (k, p) in params.iter_mut().enumerate() {
            let (eg, ed) = (&mut self.sq_grad[k], &mut self.sq_update[k]);
            if eg.len() != p.len() {
                return Err(Error::shape(eg.len(), p.len()));
            }
            let width = if p.has_sparse_rows() && p.shape().len() == 2 {
                p.shape()[1]
            } else {
                p.len().max(1)
            };
            for start in (0..p.len()).step_by(width) {
                let end = start + width;
                if p.has_sparse_rows() && p.grad[start..end].iter().all(|g| *g == 0.0) {
                    continue;
                }
                for i in start..end {
                    let g = p.grad[i];
                    eg[i] = rho * eg[i] + (1.0 - rho) * g * g;
                    let delta = -((ed[i] + eps).sqrt() / (eg[i] + eps).sqrt()) * g;
                    ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
                    p.values[i] += lr * delta;
                    p.grad[i] = 0.0;
                }
            }
            if !p.all_finite() {
                return Err(Error::Validation(format!(
                    "non-finite values in {} after update",
                    p.name()
                )));
            }
        }
        Ok(())
    }
}

/// Plain gradient descent.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn step<P: Parameterized + ?Sized>(&self, model: &mut P) {
        for p in model.params_mut() {
            for (v, g) in p.values.iter_mut().zip(p.grad.iter_mut()) {
                *v -= self.lr * *g;
                *g = 0.0;
            }
        }
    }
}
