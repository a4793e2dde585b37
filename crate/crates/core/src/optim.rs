//! SGD and Adam, loss smoothing, and reproducible minibatch draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "optimizer", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn sgd(lr: f64) -> Self {
        OptimizerKind::Sgd { lr }
    }

    /// Adam with `(β1, β2, eps) = (0.9, 0.999, 1e-8)`.
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerKind::Sgd { lr } | OptimizerKind::Adam { lr, .. } => lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, dim: usize) -> Self {
        let moments = if matches!(kind, OptimizerKind::Adam { .. }) { dim } else { 0 };
        Self {
            kind,
            step_count: 0,
            first_moment: vec![0.0; moments],
            second_moment: vec![0.0; moments],
        }
    }

    /// Updates `theta` in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != grad.len() {
            return Err(Error::DimensionMismatch { expected: theta.len(), got: grad.len() });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        self.step_count += 1;
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                theta.iter_mut().zip(grad).for_each(|(t, g)| *t -= lr * g);
            }
            OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                if self.first_moment.len() != theta.len() {
                    return Err(Error::DimensionMismatch { expected: self.first_moment.len(), got: theta.len() });
                }
                let t = self.step_count as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((th, &g), m), v) in theta
                    .iter_mut()
                    .zip(grad)
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = if c1 > 0.0 { *m / c1 } else { *m };
                    let v_hat = if c2 > 0.0 { *v / c2 } else { *v };
                    *th -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// Functional form of [`OptimizerState::step`].
pub fn opt_step(state: &OptimizerState, theta: &[f64], grad: &[f64]) -> Result<(Vec<f64>, OptimizerState)> {
    let mut s = state.clone();
    let mut th = theta.to_vec();
    s.step(&mut th, grad)?;
    Ok((th, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaTracker {
    pub alpha: f64,
    pub current: Option<f64>,
}

impl EmaTracker {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("EMA factor {alpha} outside (0, 1)")));
        }
        Ok(Self { alpha, current: None })
    }

    pub fn update(&mut self, value: f64) -> f64 {
        let next = match self.current {
            None => value,
            Some(c) => self.alpha * c + (1.0 - self.alpha) * value,
        };
        self.current = Some(next);
        next
    }
}

/// `batch` distinct indices below `dataset_size`, fixed by `(seed, step)`.
pub fn minibatch_indices(dataset_size: usize, batch: usize, seed: u64, step: u64) -> Result<Vec<usize>> {
    if batch == 0 || batch > dataset_size {
        return Err(Error::InvalidArgument(format!(
            "batch {batch} must be in 1..={dataset_size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    Ok(rand::seq::index::sample(&mut rng, dataset_size, batch).into_vec())
}
