//! He (Kaiming) initialization for ReLU networks.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// I.i.d. Gaussian weights with mean 0 and standard deviation `sqrt(2/fan_in)`.
pub fn he_init(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(Error::contract("he_init", "fan_in must be positive"));
    }
    let std = (2.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| std * rng.normal()).collect();
    Tensor::new(shape.to_vec(), data)
}
