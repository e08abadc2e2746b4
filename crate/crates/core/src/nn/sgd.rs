use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Mini-batch SGD with momentum and L2 weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 32,
            epochs: 10,
            seed: 1,
        }
    }
}

impl SgdConfig {
    /// Zero learning rate is accepted (it freezes the weights); negative or
    /// non-finite rates are not.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be >= 0", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0,1)", self.momentum)));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!("weight decay {} must be >= 0", self.weight_decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }

    /// Step schedule: the rate halves after every third of the epochs.
    pub fn learning_rate_at(&self, epoch: usize) -> f32 {
        let period = self.epochs.div_ceil(3).max(1);
        self.learning_rate * 0.5f32.powi((epoch / period) as i32)
    }
}

/// One update `v ← μv − lr·(g + wd·p); p ← p + v`.
pub fn sgd_step(
    name: &str,
    param: &mut Tensor,
    grad: &Tensor,
    velocity: &mut Tensor,
    lr: f32,
    momentum: f32,
    weight_decay: f32,
) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != velocity.shape() {
        return Err(Error::dim(format!("{name} gradient"), param.len(), grad.len()));
    }
    grad.ensure_finite(name)?;
    for ((p, &g), v) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(velocity.data_mut())
    {
        *v = momentum * *v - lr * (g + weight_decay * *p);
        *p += *v;
    }
    Ok(())
}
