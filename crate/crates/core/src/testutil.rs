//! Finite-difference helpers shared by unit tests.

use crate::rng::Rng;
use crate::tensor::Tensor;

pub(crate) const FD_EPS: f64 = 1e-4;

pub(crate) fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.normal()).collect()).unwrap()
}

/// Central differences of a scalar function at every entry of `at`.
pub(crate) fn numeric_grad(at: &Tensor, f: impl Fn(&Tensor) -> f64) -> Tensor {
    let mut probe = at.clone();
    let mut grad = Tensor::zeros(at.shape());
    for i in 0..at.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + FD_EPS;
        let up = f(&probe);
        probe.data_mut()[i] = orig - FD_EPS;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * FD_EPS);
    }
    grad
}

pub(crate) fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

pub(crate) fn assert_grad_close(analytic: &Tensor, numeric: &Tensor, tol: f64) {
    assert_eq!(analytic.shape(), numeric.shape());
    for (i, (a, n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
        let e = rel_err(*a, *n);
        assert!(e < tol, "entry {i}: analytic {a} vs numeric {n} (rel err {e:e})");
    }
}
