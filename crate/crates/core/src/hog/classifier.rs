use std::path::Path;

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const WEIGHT_NAME: &str = "hog.w";
pub const BIAS_NAME: &str = "hog.b";

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearClassifier {
    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let w = Tensor::from_vec(self.weights.clone());
        let b = Tensor::from_vec(vec![self.bias]);
        checkpoint::encode([(WEIGHT_NAME, &w), (BIAS_NAME, &b)])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries = checkpoint::load(path)?;
        let find = |name: &str| {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Data(format!("{}: missing tensor {name}", path.display())))
        };
        let w = find(WEIGHT_NAME)?;
        let b = find(BIAS_NAME)?;
        if w.rank() != 1 || b.len() != 1 {
            return Err(Error::Data(format!(
                "{}: hog classifier tensors have shapes {:?} and {:?}",
                path.display(),
                w.shape(),
                b.shape()
            )));
        }
        Ok(Self {
            weights: w.data().to_vec(),
            bias: b.data()[0],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTraining {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty on the weights (not the bias).
    pub regularization: f64,
    pub seed: u64,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.01,
            regularization: 1e-4,
            seed: 0,
        }
    }
}

/// Fraction of samples on the correct side of zero.
pub fn accuracy(clf: &LinearClassifier, positives: &[Vec<f64>], negatives: &[Vec<f64>]) -> f64 {
    let right = positives.iter().filter(|x| clf.score(x) > 0.0).count()
        + negatives.iter().filter(|x| clf.score(x) <= 0.0).count();
    right as f64 / (positives.len() + negatives.len()) as f64
}

/// Class-weighted hinge loss plus L2, minimized by seeded SGD with a
/// `lr / (1 + epoch)` step schedule. Returns the model and its training
/// accuracy.
pub fn train_linear_classifier(
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    cfg: &ClassifierTraining,
) -> Result<(LinearClassifier, f64)> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Data(format!(
            "classifier needs both classes, got {} positives and {} negatives",
            positives.len(),
            negatives.len()
        )));
    }
    let dim = positives[0].len();
    if positives.iter().chain(negatives).any(|x| x.len() != dim) {
        return Err(Error::contract("train_linear_classifier", "descriptor lengths differ"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.regularization >= 0.0 && cfg.epochs > 0) {
        return Err(Error::Config(format!("invalid classifier training settings {cfg:?}")));
    }
    let n = positives.len() + negatives.len();
    let w_pos = n as f64 / (2 * positives.len()) as f64;
    let w_neg = n as f64 / (2 * negatives.len()) as f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::named(cfg.seed, "hog-classifier");
    let mut clf = LinearClassifier {
        weights: vec![0.0; dim],
        bias: 0.0,
    };
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate / (1.0 + epoch as f64);
        rng.shuffle(&mut order);
        for &i in &order {
            let (x, y, cw) = if i < positives.len() {
                (&positives[i], 1.0, w_pos)
            } else {
                (&negatives[i - positives.len()], -1.0, w_neg)
            };
            let margin = y * clf.score(x);
            let decay = 1.0 - lr * cfg.regularization;
            clf.weights.iter_mut().for_each(|w| *w *= decay);
            if margin < 1.0 {
                let step = lr * cw * y;
                clf.weights.iter_mut().zip(x).for_each(|(w, v)| *w += step * v);
                clf.bias += step;
            }
        }
    }
    if !(clf.bias.is_finite() && clf.weights.iter().all(|w| w.is_finite())) {
        return Err(Error::NonFinite {
            iteration: cfg.epochs,
            detail: "hog classifier weights diverged".into(),
        });
    }
    let acc = accuracy(&clf, positives, negatives);
    Ok((clf, acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = Rng::new(seed);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        while pos.len() < n || neg.len() < n {
            let x = vec![rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)];
            let s = 2.0 * x[0] - x[1] + 0.5 * x[2] - 0.2;
            if s > 0.1 && pos.len() < n {
                pos.push(x);
            } else if s < -0.1 && neg.len() < n {
                neg.push(x);
            }
        }
        (pos, neg)
    }

    #[test]
    fn separable_toy_data_is_fit_exactly() {
        let (pos, neg) = toy(60, 1);
        let cfg = ClassifierTraining {
            epochs: 200,
            learning_rate: 0.5,
            regularization: 0.0,
            seed: 2,
        };
        let (clf, acc) = train_linear_classifier(&pos, &neg, &cfg).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(accuracy(&clf, &pos, &neg), 1.0);
    }

    #[test]
    fn score_is_affine() {
        let clf = LinearClassifier {
            weights: vec![0.5, -2.0, 1.0],
            bias: 0.25,
        };
        let x = [1.0, 2.0, 3.0];
        for alpha in [0.0, 0.5, 3.0, -1.0] {
            let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let expect = alpha * (clf.score(&x) - clf.bias) + clf.bias;
            assert!((clf.score(&ax) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn one_class_is_rejected() {
        let (pos, _) = toy(5, 3);
        assert!(matches!(
            train_linear_classifier(&pos, &[], &ClassifierTraining::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn training_is_seeded() {
        let (pos, neg) = toy(40, 4);
        let cfg = ClassifierTraining::default();
        assert_eq!(
            train_linear_classifier(&pos, &neg, &cfg).unwrap(),
            train_linear_classifier(&pos, &neg, &cfg).unwrap()
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let clf = LinearClassifier {
            weights: vec![0.1, -0.2, 3.5e-7],
            bias: -1.25,
        };
        let p = dir.path().join("hog.ckpt");
        clf.save(&p).unwrap();
        assert_eq!(LinearClassifier::load(&p).unwrap(), clf);
    }
}
