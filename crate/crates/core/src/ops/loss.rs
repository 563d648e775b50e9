use super::batch_dims;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities below this are clamped before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (_, c) = batch_dims("softmax", logits)?;
    if c < 2 {
        return Err(Error::contract("softmax", "need at least two classes"));
    }
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

fn check_one_hot(targets: &Tensor, c: usize) -> Result<()> {
    for (i, row) in targets.data().chunks(c).enumerate() {
        let ones = row.iter().filter(|&&t| t == 1.0).count();
        let zeros = row.iter().filter(|&&t| t == 0.0).count();
        if ones != 1 || ones + zeros != c {
            return Err(Error::contract(
                "cross_entropy_loss",
                format!("target row {i} is not one-hot: {row:?}"),
            ));
        }
    }
    Ok(())
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    if a.shape() != b.shape() {
        return Err(Error::contract(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    batch_dims(op, a)
}

/// Mean negative log-likelihood of the one-hot targets.
pub fn cross_entropy_loss(probs: &Tensor, targets: &Tensor) -> Result<f64> {
    let (b, c) = same_shape("cross_entropy_loss", probs, targets)?;
    check_one_hot(targets, c)?;
    let sum: f64 = probs
        .data()
        .iter()
        .zip(targets.data())
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| t * p.max(LOG_CLAMP).ln())
        .sum();
    Ok(-sum / b as f64)
}

/// Gradient of softmax followed by cross-entropy with respect to the logits.
pub fn softmax_cross_entropy_grad(probs: &Tensor, targets: &Tensor) -> Result<Tensor> {
    let (b, c) = same_shape("softmax_cross_entropy_grad", probs, targets)?;
    check_one_hot(targets, c)?;
    let inv_b = 1.0 / b as f64;
    let data = probs
        .data()
        .iter()
        .zip(targets.data())
        .map(|(p, t)| (p - t) * inv_b)
        .collect();
    Tensor::new(probs.shape().to_vec(), data)
}

/// Half the summed squared error, averaged over the batch, and its gradient
/// with respect to `outputs`.
pub fn euclidean_loss(outputs: &Tensor, targets: &Tensor) -> Result<(f64, Tensor)> {
    let (b, _) = same_shape("euclidean_loss", outputs, targets)?;
    let inv_b = 1.0 / b as f64;
    let mut sq = 0.0;
    let grad = outputs
        .data()
        .iter()
        .zip(targets.data())
        .map(|(o, s)| {
            let d = o - s;
            sq += d * d;
            d * inv_b
        })
        .collect();
    Ok((0.5 * sq * inv_b, Tensor::new(outputs.shape().to_vec(), grad)?))
}

/// Weighted multi-task objective `l_ce + lambda·l_euclid`.
pub fn total_loss(l_ce: f64, l_euclid: f64, lambda: f64) -> f64 {
    l_ce + lambda * l_euclid
}
