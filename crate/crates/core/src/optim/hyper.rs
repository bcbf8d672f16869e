use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer hyperparameters.
///
/// `alpha = beta = 0` is plain SGD; the continuous time step is `eta` for
/// SGD and `eta (1 − alpha)` for momentum runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub eta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_batch_size() -> usize {
    32
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            lambda: 0.0,
            alpha: 0.0,
            beta: 0.0,
            batch_size: default_batch_size(),
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn sgd(eta: f64, lambda: f64) -> Self {
        Self { eta, lambda, ..Self::default() }
    }

    pub fn momentum(eta: f64, lambda: f64, alpha: f64, beta: f64) -> Self {
        Self { eta, lambda, alpha, beta, ..Self::default() }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_momentum(&self) -> bool {
        self.beta != 0.0 || self.alpha != 0.0
    }

    /// Continuous time elapsed per optimizer step.
    pub fn time_step(&self) -> f64 {
        if self.is_momentum() {
            self.eta * (1.0 - self.alpha)
        } else {
            self.eta
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("learning rate must be >= 0, got {}", self.eta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("weight decay must be >= 0, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("damping must lie in [0, 1), got {}", self.alpha));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.beta));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        Ok(())
    }
}
