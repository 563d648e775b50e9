use std::path::Path;

use rayon::prelude::*;

use super::topology::{ArchitectureConfig, ConvLayer, PoolLayer, Topology, NUM_CLASSES};
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::init::he_init;
use crate::ops::{
    conv2d_backward_impl, conv2d_forward, cross_entropy_loss, euclidean_loss, fc_backward,
    fc_forward, maxpool_backward, maxpool_forward, relu_backward, relu_in_place, softmax,
    softmax_cross_entropy_grad, PoolOutput,
};
use crate::rng::Rng;
use crate::tensor::{Parameter, Tensor};

// Parameter slots, in checkpoint declaration order.
const CONV1_W: usize = 0;
const CONV2_W: usize = 2;
const CONV3_W: usize = 4;
const CONV4_W: usize = 6;
const FC1_W: usize = 8;
const FC2_W: usize = 10;
const CLS_W: usize = 12;
const FC3_W: usize = 14;
const FC4_W: usize = 16;
const NUM_PARAMS: usize = 18;

/// Per-sample activations of the convolutional trunk.
#[derive(Debug, Clone)]
struct TrunkCache {
    input: Tensor,
    conv1: Tensor,
    pool1: PoolOutput,
    conv2: Tensor,
    pool2: PoolOutput,
    conv3: Tensor,
    conv4: Tensor,
    pool3: PoolOutput,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Softmax outputs, `[B, 2]`; column 1 is the warning class.
    pub prediction_probs: Tensor,
    /// Segmentation regression, `[B, M·N]`.
    pub segmentation_vec: Tensor,
    trunks: Vec<TrunkCache>,
    pool2_flat: Tensor,
    pool3_flat: Tensor,
    fc1: Tensor,
    fc3: Tensor,
    concat: Tensor,
    fc2: Tensor,
}

impl ForwardOutput {
    pub fn batch_size(&self) -> usize {
        self.trunks.len()
    }

    /// Cross-entropy and Euclidean losses for this batch.
    pub fn losses(&self, labels: &[u8], seg_targets: &Tensor) -> Result<(f64, f64)> {
        let t = one_hot(labels)?;
        let l_ce = cross_entropy_loss(&self.prediction_probs, &t)?;
        let (l_e, _) = euclidean_loss(&self.segmentation_vec, seg_targets)?;
        Ok((l_ce, l_e))
    }
}

fn one_hot(labels: &[u8]) -> Result<Tensor> {
    let mut t = Tensor::zeros(&[labels.len().max(1), NUM_CLASSES]);
    if labels.is_empty() {
        return Err(Error::contract("one_hot", "empty batch"));
    }
    for (i, &l) in labels.iter().enumerate() {
        if l as usize >= NUM_CLASSES {
            return Err(Error::contract("one_hot", format!("label {l} is not 0 or 1")));
        }
        t.set(&[i, l as usize], 1.0);
    }
    Ok(t)
}

fn stack(rows: &[&[f64]]) -> Result<Tensor> {
    let d = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * d);
    for r in rows {
        data.extend_from_slice(r);
    }
    Tensor::new(vec![rows.len(), d], data)
}

fn conv_relu(x: &Tensor, w: &Parameter, b: &Parameter, layer: &ConvLayer) -> Result<Tensor> {
    let mut y = conv2d_forward(x, &w.value, &b.value, layer.stride, layer.pad)?;
    relu_in_place(&mut y);
    Ok(y)
}

fn pool(x: &Tensor, layer: &PoolLayer) -> Result<PoolOutput> {
    maxpool_forward(x, (layer.kernel_h, layer.kernel_w), layer.stride)
}

/// Gradients of the four conv layers for one sample.
struct TrunkGrads {
    convs: [(Tensor, Tensor); 4],
}

/// The assembled network: topology plus parameters in declaration order.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    config: ArchitectureConfig,
    topology: Topology,
    params: Vec<Parameter>,
}

impl NetworkGraph {
    /// Allocates every layer and He-initializes the weights (biases at 0).
    pub fn build(config: &ArchitectureConfig, rng: &mut Rng) -> Result<Self> {
        let topology = Topology::plan(config)?;
        let mut params = Vec::with_capacity(NUM_PARAMS);
        for (name, shape, fan_in) in topology.parameter_shapes() {
            let value = if name.ends_with(".b") {
                Tensor::zeros(&shape)
            } else {
                he_init(&shape, fan_in, rng)?
            };
            params.push(Parameter::new(name, value));
        }
        Ok(Self {
            config: config.clone(),
            topology,
            params,
        })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Parameter::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    fn check_image(&self, img: &Tensor) -> Result<()> {
        if img.shape() != self.topology.input {
            return Err(Error::contract(
                "forward",
                format!("image shape {:?}, network expects {:?}", img.shape(), self.topology.input),
            ));
        }
        Ok(())
    }

    fn trunk_forward(&self, input: &Tensor) -> Result<TrunkCache> {
        let t = &self.topology;
        let p = &self.params;
        let conv1 = conv_relu(input, &p[CONV1_W], &p[CONV1_W + 1], &t.conv1)?;
        let pool1 = pool(&conv1, &t.pool1)?;
        let conv2 = conv_relu(&pool1.output, &p[CONV2_W], &p[CONV2_W + 1], &t.conv2)?;
        let pool2 = pool(&conv2, &t.pool2)?;
        let conv3 = conv_relu(&pool2.output, &p[CONV3_W], &p[CONV3_W + 1], &t.conv3)?;
        let conv4 = conv_relu(&conv3, &p[CONV4_W], &p[CONV4_W + 1], &t.conv4)?;
        let pool3 = pool(&conv4, &t.pool3)?;
        Ok(TrunkCache {
            input: input.clone(),
            conv1,
            pool1,
            conv2,
            pool2,
            conv3,
            conv4,
            pool3,
        })
    }

    /// Runs both branches on a batch of `[3, N, M]` images.
    pub fn forward(&self, images: &[&Tensor]) -> Result<ForwardOutput> {
        if images.is_empty() {
            return Err(Error::contract("forward", "empty batch"));
        }
        for img in images {
            self.check_image(img)?;
        }
        let trunks = images
            .par_iter()
            .map(|img| self.trunk_forward(img))
            .collect::<Result<Vec<_>>>()?;
        let p = &self.params;

        let pool2_rows: Vec<&[f64]> = trunks.iter().map(|c| c.pool2.output.data()).collect();
        let pool3_rows: Vec<&[f64]> = trunks.iter().map(|c| c.pool3.output.data()).collect();
        let pool2_flat = stack(&pool2_rows)?;
        let pool3_flat = stack(&pool3_rows)?;

        let mut fc1 = fc_forward(&pool3_flat, &p[FC1_W].value, &p[FC1_W + 1].value)?;
        relu_in_place(&mut fc1);
        let fc3 = fc_forward(&pool2_flat, &p[FC3_W].value, &p[FC3_W + 1].value)?;
        let segmentation_vec = fc_forward(&fc3, &p[FC4_W].value, &p[FC4_W + 1].value)?;

        let b = images.len();
        let concat_rows: Vec<Vec<f64>> = (0..b)
            .map(|i| [fc1.row(i), fc3.row(i)].concat())
            .collect();
        let concat = stack(&concat_rows.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
        let mut fc2 = fc_forward(&concat, &p[FC2_W].value, &p[FC2_W + 1].value)?;
        relu_in_place(&mut fc2);
        let logits = fc_forward(&fc2, &p[CLS_W].value, &p[CLS_W + 1].value)?;
        let prediction_probs = softmax(&logits)?;

        Ok(ForwardOutput {
            prediction_probs,
            segmentation_vec,
            trunks,
            pool2_flat,
            pool3_flat,
            fc1,
            fc3,
            concat,
            fc2,
        })
    }

    /// Accumulates `∂(L_c + lambda·L_e)/∂w` into every parameter's gradient.
    pub fn backward(
        &mut self,
        fwd: &ForwardOutput,
        labels: &[u8],
        seg_targets: &Tensor,
        lambda: f64,
    ) -> Result<()> {
        self.backward_weighted(fwd, labels, seg_targets, 1.0, lambda)
    }

    /// Backward pass for `ce_weight·L_c + seg_weight·L_e`.
    ///
    /// A zero `seg_weight` skips the FC4 backward entirely, so FC4 gradients
    /// stay exactly zero.
    pub fn backward_weighted(
        &mut self,
        fwd: &ForwardOutput,
        labels: &[u8],
        seg_targets: &Tensor,
        ce_weight: f64,
        seg_weight: f64,
    ) -> Result<()> {
        let b = fwd.batch_size();
        if labels.len() != b {
            return Err(Error::contract(
                "backward",
                format!("{} labels for a batch of {b}", labels.len()),
            ));
        }
        if seg_targets.shape() != fwd.segmentation_vec.shape() {
            return Err(Error::contract(
                "backward",
                format!(
                    "segmentation targets {:?}, outputs {:?}",
                    seg_targets.shape(),
                    fwd.segmentation_vec.shape()
                ),
            ));
        }
        let t = self.topology.clone();
        let targets = one_hot(labels)?;

        // Prediction head.
        let mut g_logits = softmax_cross_entropy_grad(&fwd.prediction_probs, &targets)?;
        g_logits.scale(ce_weight);
        let g = fc_backward(&g_logits, &fwd.fc2, &self.params[CLS_W].value)?;
        self.accumulate(CLS_W, &g.weights, &g.bias)?;
        let g_fc2 = relu_backward(&g.input, &fwd.fc2)?;
        let g = fc_backward(&g_fc2, &fwd.concat, &self.params[FC2_W].value)?;
        self.accumulate(FC2_W, &g.weights, &g.bias)?;

        let f1 = t.fc1.d_out;
        let f3 = t.fc3.d_out;
        let mut g_fc1 = Tensor::zeros(&[b, f1]);
        let mut g_fc3 = Tensor::zeros(&[b, f3]);
        for i in 0..b {
            let row = g.input.row(i);
            g_fc1.row_mut(i).copy_from_slice(&row[..f1]);
            g_fc3.row_mut(i).copy_from_slice(&row[f1..]);
        }

        // Segmentation head.
        if seg_weight != 0.0 {
            let (_, mut g_seg) = euclidean_loss(&fwd.segmentation_vec, seg_targets)?;
            g_seg.scale(seg_weight);
            let g = fc_backward(&g_seg, &fwd.fc3, &self.params[FC4_W].value)?;
            self.accumulate(FC4_W, &g.weights, &g.bias)?;
            g_fc3.add_assign(&g.input)?;
        }
        let g = fc_backward(&g_fc3, &fwd.pool2_flat, &self.params[FC3_W].value)?;
        self.accumulate(FC3_W, &g.weights, &g.bias)?;
        let g_pool2_seg = g.input;

        let g_fc1 = relu_backward(&g_fc1, &fwd.fc1)?;
        let g = fc_backward(&g_fc1, &fwd.pool3_flat, &self.params[FC1_W].value)?;
        self.accumulate(FC1_W, &g.weights, &g.bias)?;
        let g_pool3 = g.input;

        // Convolutional trunk, one sample at a time; sums run in sample order.
        let per_sample = (0..b)
            .into_par_iter()
            .map(|i| {
                self.trunk_backward(&fwd.trunks[i], g_pool3.row(i), g_pool2_seg.row(i))
            })
            .collect::<Result<Vec<_>>>()?;
        for grads in per_sample {
            for (slot, (gw, gb)) in [CONV1_W, CONV2_W, CONV3_W, CONV4_W].into_iter().zip(&grads.convs) {
                self.accumulate(slot, gw, gb)?;
            }
        }
        Ok(())
    }

    fn trunk_backward(&self, c: &TrunkCache, g_pool3: &[f64], g_pool2_seg: &[f64]) -> Result<TrunkGrads> {
        let t = &self.topology;
        let p = &self.params;
        let g = Tensor::new(c.pool3.output.shape().to_vec(), g_pool3.to_vec())?;
        let g = maxpool_backward(&g, &c.pool3.argmax, c.conv4.shape())?;
        let g = relu_backward(&g, &c.conv4)?;
        let (gi, w4, b4) = conv2d_backward_impl(&g, &c.conv3, &p[CONV4_W].value, 1, t.conv4.pad, true)?;
        let g = relu_backward(&gi.expect("input grad"), &c.conv3)?;
        let (gi, w3, b3) =
            conv2d_backward_impl(&g, &c.pool2.output, &p[CONV3_W].value, 1, t.conv3.pad, true)?;
        let mut g = gi.expect("input grad");
        for (a, s) in g.data_mut().iter_mut().zip(g_pool2_seg) {
            *a += s;
        }
        let g = maxpool_backward(&g, &c.pool2.argmax, c.conv2.shape())?;
        let g = relu_backward(&g, &c.conv2)?;
        let (gi, w2, b2) =
            conv2d_backward_impl(&g, &c.pool1.output, &p[CONV2_W].value, 1, t.conv2.pad, true)?;
        let g = maxpool_backward(&gi.expect("input grad"), &c.pool1.argmax, c.conv1.shape())?;
        let g = relu_backward(&g, &c.conv1)?;
        let (_, w1, b1) = conv2d_backward_impl(
            &g,
            &c.input,
            &p[CONV1_W].value,
            t.conv1.stride,
            t.conv1.pad,
            false,
        )?;
        Ok(TrunkGrads {
            convs: [(w1, b1), (w2, b2), (w3, b3), (w4, b4)],
        })
    }

    fn accumulate(&mut self, weight_slot: usize, gw: &Tensor, gb: &Tensor) -> Result<()> {
        self.params[weight_slot].grad.add_assign(gw)?;
        self.params[weight_slot + 1].grad.add_assign(gb)
    }

    /// Probability of the warning class for one image.
    pub fn predict_warning_score(&self, image: &Tensor) -> Result<f64> {
        let out = self.forward(&[image])?;
        Ok(out.prediction_probs.at(&[0, 1]))
    }

    /// Warning scores for many images, evaluated in chunks.
    pub fn predict_scores(&self, images: &[Tensor]) -> Result<Vec<f64>> {
        let mut scores = Vec::with_capacity(images.len());
        for chunk in images.chunks(32) {
            let refs: Vec<&Tensor> = chunk.iter().collect();
            let out = self.forward(&refs)?;
            scores.extend((0..chunk.len()).map(|i| out.prediction_probs.at(&[i, 1])));
        }
        Ok(scores)
    }

    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        checkpoint::encode(self.params.iter().map(|p| (p.name.as_str(), &p.value)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.checkpoint_bytes())?;
        Ok(())
    }

    /// Loads parameters written by [`NetworkGraph::save`] for the same
    /// architecture.
    pub fn load(config: &ArchitectureConfig, path: &Path) -> Result<Self> {
        let topology = Topology::plan(config)?;
        let entries = checkpoint::load(path)?;
        let expected = topology.parameter_shapes();
        if entries.len() != expected.len() {
            return Err(Error::Data(format!(
                "{}: {} parameters, architecture needs {}",
                path.display(),
                entries.len(),
                expected.len()
            )));
        }
        let mut params = Vec::with_capacity(entries.len());
        for ((name, value), (want_name, want_shape, _)) in entries.into_iter().zip(expected) {
            if name != want_name || value.shape() != want_shape.as_slice() {
                return Err(Error::Data(format!(
                    "{}: found {name} {:?}, expected {want_name} {want_shape:?}",
                    path.display(),
                    value.shape()
                )));
            }
            params.push(Parameter::new(name, value));
        }
        Ok(Self {
            config: config.clone(),
            topology,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::topology::{is_segmentation_only, is_shared};
    use crate::testutil::rel_err;

    fn tiny() -> (NetworkGraph, Vec<Tensor>, Vec<u8>, Tensor) {
        let cfg = ArchitectureConfig::with_scale(16);
        let mut rng = Rng::new(5);
        let g = NetworkGraph::build(&cfg, &mut rng).unwrap();
        let [c, h, w] = g.topology().input;
        let imgs: Vec<Tensor> = (0..2)
            .map(|_| Tensor::new(vec![c, h, w], (0..c * h * w).map(|_| rng.uniform()).collect()).unwrap())
            .collect();
        let d = g.topology().segmentation_len();
        let seg = Tensor::new(vec![2, d], (0..2 * d).map(|_| rng.below(6) as f64 / 5.0).collect()).unwrap();
        (g, imgs, vec![0, 1], seg)
    }

    fn grads_for(g: &mut NetworkGraph, imgs: &[Tensor], labels: &[u8], seg: &Tensor, ce: f64, se: f64) -> Vec<Tensor> {
        let refs: Vec<&Tensor> = imgs.iter().collect();
        let out = g.forward(&refs).unwrap();
        g.zero_grad();
        g.backward_weighted(&out, labels, seg, ce, se).unwrap();
        g.params().iter().map(|p| p.grad.clone()).collect()
    }

    #[test]
    fn prediction_rows_are_distributions() {
        let (g, imgs, _, _) = tiny();
        let out = g.forward(&[&imgs[0], &imgs[1]]).unwrap();
        assert_eq!(out.segmentation_vec.shape(), &[2, 32 * 16]);
        for i in 0..2 {
            let row = out.prediction_probs.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wrong_image_shape_is_rejected() {
        let (g, _, _, _) = tiny();
        let bad = Tensor::zeros(&[3, 10, 10]);
        assert!(matches!(g.forward(&[&bad]), Err(Error::Contract { .. })));
    }

    #[test]
    fn zero_lambda_leaves_fc4_untouched() {
        let (mut g, imgs, labels, seg) = tiny();
        let grads = grads_for(&mut g, &imgs, &labels, &seg, 1.0, 0.0);
        for (p, gr) in g.params().iter().zip(&grads) {
            if is_segmentation_only(&p.name) {
                assert!(gr.data().iter().all(|&v| v == 0.0), "{} has gradient", p.name);
            } else if p.name.ends_with(".w") {
                assert!(gr.data().iter().any(|&v| v != 0.0), "{} has no gradient", p.name);
            }
        }
    }

    #[test]
    fn shared_gradients_are_additive() {
        let (mut g, imgs, labels, seg) = tiny();
        let lambda = 1e-3;
        let both = grads_for(&mut g, &imgs, &labels, &seg, 1.0, lambda);
        let ce = grads_for(&mut g, &imgs, &labels, &seg, 1.0, 0.0);
        let eu = grads_for(&mut g, &imgs, &labels, &seg, 0.0, 1.0);
        for (i, p) in g.params().iter().enumerate() {
            for ((a, c), e) in both[i].data().iter().zip(ce[i].data()).zip(eu[i].data()) {
                assert!((a - (c + lambda * e)).abs() < 1e-9, "{}", p.name);
            }
        }
        // both losses actually reach the shared layers
        for (i, p) in g.params().iter().enumerate() {
            if is_shared(&p.name) && p.name.ends_with(".w") {
                assert!(ce[i].data().iter().any(|&v| v != 0.0));
                assert!(eu[i].data().iter().any(|&v| v != 0.0));
            }
        }
    }

    #[test]
    fn duplicated_batch_keeps_mean_gradient() {
        let (mut g, imgs, labels, seg) = tiny();
        let once = grads_for(&mut g, &imgs, &labels, &seg, 1.0, 1e-3);
        let imgs2: Vec<Tensor> = imgs.iter().chain(&imgs).cloned().collect();
        let labels2: Vec<u8> = labels.iter().chain(&labels).cloned().collect();
        let d = seg.shape()[1];
        let seg2 = Tensor::new(vec![4, d], [seg.data(), seg.data()].concat()).unwrap();
        let twice = grads_for(&mut g, &imgs2, &labels2, &seg2, 1.0, 1e-3);
        for (a, b) in once.iter().zip(&twice) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!(rel_err(*x, *y) < 1e-9 || (x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_weights_score_one_half() {
        let (mut g, imgs, _, _) = tiny();
        for p in g.params_mut() {
            p.value.fill(0.0);
        }
        assert_eq!(g.predict_warning_score(&imgs[0]).unwrap(), 0.5);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (g, imgs, _, _) = tiny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        g.save(&path).unwrap();
        let back = NetworkGraph::load(g.config(), &path).unwrap();
        assert_eq!(back.checkpoint_bytes(), g.checkpoint_bytes());
        assert_eq!(
            back.predict_warning_score(&imgs[0]).unwrap().to_bits(),
            g.predict_warning_score(&imgs[0]).unwrap().to_bits()
        );
        assert!(NetworkGraph::load(&ArchitectureConfig::with_scale(8), &path).is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = ArchitectureConfig::with_scale(8);
        let a = NetworkGraph::build(&cfg, &mut Rng::new(3)).unwrap();
        let b = NetworkGraph::build(&cfg, &mut Rng::new(3)).unwrap();
        assert_eq!(a.checkpoint_bytes(), b.checkpoint_bytes());
        assert_eq!(a.param("fc4.w").unwrap().value.shape(), &[2048, 256]);
        assert_eq!(a.parameter_count(), a.topology().parameter_count());
    }
}
