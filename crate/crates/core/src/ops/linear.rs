use super::{batch_dims, gemm};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct FcGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn weight_dims(op: &'static str, weights: &Tensor) -> Result<(usize, usize)> {
    match *weights.shape() {
        [o, i] => Ok((o, i)),
        ref s => Err(Error::contract(op, format!("weights must be [D_out, D_in], got {s:?}"))),
    }
}

/// `out = W·x + b` for a vector or each row of a batch.
pub fn fc_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    const OP: &str = "fc_forward";
    let (b, d_in) = batch_dims(OP, input)?;
    let (d_out, w_in) = weight_dims(OP, weights)?;
    if d_in != w_in {
        return Err(Error::contract(OP, format!("input length {d_in}, weights expect {w_in}")));
    }
    if bias.len() != d_out {
        return Err(Error::contract(OP, format!("bias length {} for {d_out} outputs", bias.len())));
    }
    let mut out = Vec::with_capacity(b * d_out);
    for _ in 0..b {
        out.extend_from_slice(bias.data());
    }
    gemm(b, d_in, d_out, input.data(), false, weights.data(), true, 1.0, &mut out);
    let shape = if input.rank() == 1 { vec![d_out] } else { vec![b, d_out] };
    Tensor::new(shape, out)
}

pub fn fc_backward(grad_out: &Tensor, input: &Tensor, weights: &Tensor) -> Result<FcGrads> {
    const OP: &str = "fc_backward";
    let (b, d_in) = batch_dims(OP, input)?;
    let (gb, d_out) = batch_dims(OP, grad_out)?;
    let (w_out, w_in) = weight_dims(OP, weights)?;
    if gb != b || d_out != w_out || d_in != w_in {
        return Err(Error::contract(
            OP,
            format!(
                "grad {:?}, input {:?}, weights {:?} are inconsistent",
                grad_out.shape(),
                input.shape(),
                weights.shape()
            ),
        ));
    }
    let go = grad_out.data();
    let mut grad_in = vec![0.0; b * d_in];
    gemm(b, d_out, d_in, go, false, weights.data(), false, 0.0, &mut grad_in);
    let mut grad_w = vec![0.0; d_out * d_in];
    gemm(d_out, b, d_in, go, true, input.data(), false, 0.0, &mut grad_w);
    let mut grad_b = vec![0.0; d_out];
    for row in go.chunks(d_out) {
        for (acc, g) in grad_b.iter_mut().zip(row) {
            *acc += g;
        }
    }
    Ok(FcGrads {
        input: Tensor::new(input.shape().to_vec(), grad_in)?,
        weights: Tensor::new(vec![d_out, d_in], grad_w)?,
        bias: Tensor::new(vec![d_out], grad_b)?,
    })
}
