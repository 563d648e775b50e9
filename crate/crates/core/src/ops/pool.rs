use super::chw;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn pool_output_len(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    (stride > 0 && kernel > 0 && input >= kernel).then(|| (input - kernel) / stride + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolOutput {
    pub output: Tensor,
    /// Flat input index of each output's winning element.
    pub argmax: Vec<usize>,
}

/// Max pooling over `kernel = (height, width)` windows.
///
/// Ties go to the lowest flat input index.
pub fn maxpool_forward(input: &Tensor, kernel: (usize, usize), stride: usize) -> Result<PoolOutput> {
    const OP: &str = "maxpool_forward";
    let (c, h, w) = chw(OP, input)?;
    let (kh, kw) = kernel;
    let (Some(oh), Some(ow)) = (pool_output_len(h, kh, stride), pool_output_len(w, kw, stride)) else {
        return Err(Error::contract(
            OP,
            format!("window {kh}x{kw} (stride {stride}) does not fit input {h}x{w}"),
        ));
    };
    let data = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for y in oy * stride..oy * stride + kh {
                    for x in ox * stride..ox * stride + kw {
                        let idx = base + y * w + x;
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok(PoolOutput {
        output: Tensor::new(vec![c, oh, ow], out)?,
        argmax,
    })
}

/// Routes each upstream gradient to the input element that won its window.
pub fn maxpool_backward(grad_out: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(Error::contract(
            "maxpool_backward",
            format!("{} gradients for {} windows", grad_out.len(), argmax.len()),
        ));
    }
    let mut grad_in = Tensor::zeros(input_shape);
    let gi = grad_in.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        gi[idx] += g;
    }
    Ok(grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::testutil::random_tensor;

    fn window_scan(input: &Tensor, k: usize, stride: usize) -> Vec<f64> {
        let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let mut out = vec![];
        for ch in 0..c {
            for oy in 0..(h - k) / stride + 1 {
                for ox in 0..(w - k) / stride + 1 {
                    let mut m = f64::NEG_INFINITY;
                    for dy in 0..k {
                        for dx in 0..k {
                            m = m.max(input.at(&[ch, oy * stride + dy, ox * stride + dx]));
                        }
                    }
                    out.push(m);
                }
            }
        }
        out
    }

    #[test]
    fn constant_input_gives_constant_output() {
        let input = Tensor::full(&[2, 7, 5], 3.5);
        let p = maxpool_forward(&input, (3, 3), 2).unwrap();
        assert_eq!(p.output.shape(), &[2, 3, 2]);
        assert!(p.output.data().iter().all(|&v| v == 3.5));
        // ties resolve to the window's first element
        assert_eq!(p.argmax[0], 0);
        assert_eq!(p.argmax[1], 2);
    }

    #[test]
    fn sixteen_ramp_pools_to_bottom_right() {
        let input = Tensor::new(vec![1, 4, 4], (1..=16).map(f64::from).collect()).unwrap();
        let p = maxpool_forward(&input, (3, 3), 2).unwrap();
        assert_eq!(p.output.shape(), &[1, 1, 1]);
        assert_eq!(p.output.data(), &[11.0]);
        assert_eq!(p.output.data(), window_scan(&input, 3, 2).as_slice());
    }

    #[test]
    fn matches_window_scan_on_random_input() {
        let mut rng = Rng::new(8);
        let input = random_tensor(&[3, 9, 11], &mut rng);
        let p = maxpool_forward(&input, (3, 3), 2).unwrap();
        assert_eq!(p.output.data(), window_scan(&input, 3, 2).as_slice());
    }

    #[test]
    fn backward_conserves_mass() {
        let mut rng = Rng::new(2);
        let input = random_tensor(&[2, 8, 8], &mut rng);
        let p = maxpool_forward(&input, (3, 3), 2).unwrap();
        let go = random_tensor(p.output.shape(), &mut rng);
        let gi = maxpool_backward(&go, &p.argmax, input.shape()).unwrap();
        assert!((gi.sum() - go.sum()).abs() < 1e-12);
        for (i, &g) in gi.data().iter().enumerate() {
            if !p.argmax.contains(&i) {
                assert_eq!(g, 0.0);
            }
        }
    }

    #[test]
    fn oversized_window_is_rejected() {
        let input = Tensor::zeros(&[1, 2, 5]);
        assert!(maxpool_forward(&input, (3, 3), 2).is_err());
        assert!(maxpool_forward(&input, (2, 3), 2).is_ok());
    }
}
