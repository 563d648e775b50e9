use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Parameter;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            weight_decay: 0.0001,
            batch_size: 128,
            iterations: 2000,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Plain SGD with L2 weight decay: `w ← w − lr·(grad + wd·w)`.
pub fn sgd_step(params: &mut [Parameter], config: &OptimizerConfig) {
    let lr = config.learning_rate;
    let wd = config.weight_decay;
    for p in params {
        for (w, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
            *w -= lr * (g + wd * *w);
        }
    }
}
