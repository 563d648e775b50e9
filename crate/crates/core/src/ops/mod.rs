//! Layer operations and losses with hand-written gradients.
//!
//! Image-like tensors are `[C, H, W]` for a single sample. Fully connected
//! layers and losses take either one vector `[D]` or a batch `[B, D]`.

mod activation;
mod conv;
mod gemm;
mod linear;
mod loss;
mod pool;

pub use activation::{relu_backward, relu_forward, relu_in_place};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_len, ConvGrads};
pub use linear::{fc_backward, fc_forward, FcGrads};
pub use loss::{
    cross_entropy_loss, euclidean_loss, softmax, softmax_cross_entropy_grad, total_loss,
    LOG_CLAMP,
};
pub use pool::{maxpool_backward, maxpool_forward, pool_output_len, PoolOutput};

pub(crate) use conv::conv2d_backward_impl;
pub(crate) use gemm::gemm;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `(C, H, W)` of a rank-3 tensor.
pub(crate) fn chw(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(Error::contract(op, format!("expected [C, H, W], got {s:?}"))),
    }
}

/// `(B, D)` of a vector (B = 1) or a matrix.
pub(crate) fn batch_dims(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match *t.shape() {
        [d] => Ok((1, d)),
        [b, d] => Ok((b, d)),
        ref s => Err(Error::contract(op, format!("expected [D] or [B, D], got {s:?}"))),
    }
}
