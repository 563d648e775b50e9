use super::{chw, gemm};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output length of a convolution along one axis, or `None` when the
/// padded input is smaller than the kernel.
pub fn conv_output_len(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    (stride > 0 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    out_h: usize,
    out_w: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

fn geometry(
    op: &'static str,
    input: &Tensor,
    weights: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Geometry> {
    let (c_in, h, w) = chw(op, input)?;
    let (c_out, wc, kh, kw) = match *weights.shape() {
        [a, b, c, d] => (a, b, c, d),
        ref s => {
            return Err(Error::contract(op, format!("weights must be [C_out, C_in, k, k], got {s:?}")))
        }
    };
    if wc != c_in {
        return Err(Error::contract(
            op,
            format!("input has {c_in} channels but weights expect {wc}"),
        ));
    }
    if kh != kw {
        return Err(Error::contract(op, format!("non-square kernel {kh}x{kw}")));
    }
    if stride == 0 {
        return Err(Error::contract(op, "stride must be positive"));
    }
    let (Some(out_h), Some(out_w)) = (
        conv_output_len(h, kh, stride, pad),
        conv_output_len(w, kw, stride, pad),
    ) else {
        return Err(Error::contract(
            op,
            format!("kernel {kh} larger than padded input {h}x{w} (pad {pad})"),
        ));
    };
    Ok(Geometry {
        c_in,
        h,
        w,
        c_out,
        k: kh,
        out_h,
        out_w,
        stride,
        pad,
    })
}

/// Unfold the padded input into a `[C_in·k·k, H'·W']` matrix.
fn im2col(g: &Geometry, input: &[f64]) -> Vec<f64> {
    let npos = g.positions();
    let mut cols = vec![0.0; g.rows() * npos];
    for c in 0..g.c_in {
        let plane = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * npos..(row + 1) * npos];
                for oy in 0..g.out_h {
                    let y = (oy * g.stride + ky) as isize - g.pad as isize;
                    if y < 0 || y >= g.h as isize {
                        continue;
                    }
                    let src = &plane[y as usize * g.w..(y as usize + 1) * g.w];
                    for ox in 0..g.out_w {
                        let x = (ox * g.stride + kx) as isize - g.pad as isize;
                        if x >= 0 && x < g.w as isize {
                            dst[oy * g.out_w + ox] = src[x as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add a column matrix back onto the (unpadded) input grid.
fn col2im(g: &Geometry, cols: &[f64]) -> Vec<f64> {
    let npos = g.positions();
    let mut out = vec![0.0; g.c_in * g.h * g.w];
    for c in 0..g.c_in {
        let plane = &mut out[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * npos..(row + 1) * npos];
                for oy in 0..g.out_h {
                    let y = (oy * g.stride + ky) as isize - g.pad as isize;
                    if y < 0 || y >= g.h as isize {
                        continue;
                    }
                    for ox in 0..g.out_w {
                        let x = (ox * g.stride + kx) as isize - g.pad as isize;
                        if x >= 0 && x < g.w as isize {
                            plane[y as usize * g.w + x as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

/// 2-D cross-correlation of a `[C_in, H, W]` input with zero padding.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    const OP: &str = "conv2d_forward";
    let g = geometry(OP, input, weights, stride, pad)?;
    if bias.len() != g.c_out {
        return Err(Error::contract(
            OP,
            format!("bias has {} entries for {} output channels", bias.len(), g.c_out),
        ));
    }
    let cols = im2col(&g, input.data());
    let npos = g.positions();
    let mut out = vec![0.0; g.c_out * npos];
    for (co, row) in out.chunks_mut(npos).enumerate() {
        row.fill(bias.data()[co]);
    }
    gemm(g.c_out, g.rows(), npos, weights.data(), false, &cols, false, 1.0, &mut out);
    Tensor::new(vec![g.c_out, g.out_h, g.out_w], out)
}

/// Gradients of [`conv2d_forward`] with respect to its input, weights and bias.
pub fn conv2d_backward(
    grad_out: &Tensor,
    saved_input: &Tensor,
    weights: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads> {
    let (input, weights, bias) =
        conv2d_backward_impl(grad_out, saved_input, weights, stride, pad, true)?;
    Ok(ConvGrads {
        input: input.expect("input gradient requested"),
        weights,
        bias,
    })
}

/// Backward pass that can skip the input gradient (first layer).
pub(crate) fn conv2d_backward_impl(
    grad_out: &Tensor,
    saved_input: &Tensor,
    weights: &Tensor,
    stride: usize,
    pad: usize,
    want_input: bool,
) -> Result<(Option<Tensor>, Tensor, Tensor)> {
    const OP: &str = "conv2d_backward";
    let g = geometry(OP, saved_input, weights, stride, pad)?;
    if grad_out.shape() != [g.c_out, g.out_h, g.out_w] {
        return Err(Error::contract(
            OP,
            format!(
                "grad_out shape {:?} differs from forward output [{}, {}, {}]",
                grad_out.shape(),
                g.c_out,
                g.out_h,
                g.out_w
            ),
        ));
    }
    let npos = g.positions();
    let rows = g.rows();
    let cols = im2col(&g, saved_input.data());
    let go = grad_out.data();

    let mut grad_w = vec![0.0; g.c_out * rows];
    gemm(g.c_out, npos, rows, go, false, &cols, true, 0.0, &mut grad_w);
    let grad_b: Vec<f64> = go.chunks(npos).map(|r| r.iter().sum()).collect();

    let grad_in = if want_input {
        let mut grad_cols = vec![0.0; rows * npos];
        gemm(rows, g.c_out, npos, weights.data(), true, go, false, 0.0, &mut grad_cols);
        Some(Tensor::new(vec![g.c_in, g.h, g.w], col2im(&g, &grad_cols))?)
    } else {
        None
    };
    Ok((
        grad_in,
        Tensor::new(weights.shape().to_vec(), grad_w)?,
        Tensor::new(vec![g.c_out], grad_b)?,
    ))
}
