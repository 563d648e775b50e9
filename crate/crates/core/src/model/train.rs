use std::time::Instant;

use super::graph::NetworkGraph;
use crate::error::{Error, Result};
use crate::ops::total_loss;
use crate::optim::{sgd_step, OptimizerConfig};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Borrowed view of a training set.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub images: &'a [Tensor],
    pub labels: &'a [u8],
    /// Per-pixel regression targets, one `M·N` vector per image.
    pub seg_targets: &'a [Vec<f64>],
    /// Indices into the sample arrays that batches are drawn from; after
    /// class balancing, minority samples appear several times.
    pub pool: &'a [usize],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub optimizer: OptimizerConfig,
    pub lambda: f64,
    pub checkpoint_every: usize,
}

impl TrainOptions {
    pub fn new(optimizer: OptimizerConfig, lambda: f64) -> Self {
        Self {
            optimizer,
            lambda,
            checkpoint_every: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    pub l_total: f64,
    pub l_ce: f64,
    pub l_euclid: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str = "iteration,l_total,l_ce,l_euclid,wall_ms";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                r.iteration, r.l_total, r.l_ce, r.l_euclid, r.wall_ms
            ));
        }
        s
    }

    pub fn totals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.l_total).collect()
    }

    /// Trailing mean of the total loss over `window` iterations ending at
    /// `iteration` (1-based).
    pub fn smoothed_total(&self, iteration: usize, window: usize) -> Option<f64> {
        smoothed(&self.totals(), iteration, window)
    }
}

/// Trailing mean of `values[..iteration]` over at most `window` entries.
pub fn smoothed(values: &[f64], iteration: usize, window: usize) -> Option<f64> {
    if iteration == 0 || iteration > values.len() || window == 0 {
        return None;
    }
    let start = iteration.saturating_sub(window);
    let span = &values[start..iteration];
    Some(span.iter().sum::<f64>() / span.len() as f64)
}

pub trait TrainCallbacks {
    fn on_iteration(&mut self, _record: &LogRecord) -> Result<()> {
        Ok(())
    }

    /// Called every `checkpoint_every` iterations and after the last one.
    fn on_checkpoint(&mut self, _iteration: usize, _graph: &NetworkGraph) -> Result<()> {
        Ok(())
    }
}

pub struct NoCallbacks;

impl TrainCallbacks for NoCallbacks {}

/// Mini-batch SGD on `L_c + lambda·L_e`.
///
/// Every iteration draws `batch_size` pool entries with replacement from
/// `rng`, so the schedule depends only on the seed.
pub fn train(
    graph: &mut NetworkGraph,
    data: TrainData<'_>,
    options: &TrainOptions,
    rng: &mut Rng,
    callbacks: &mut dyn TrainCallbacks,
) -> Result<TrainingLog> {
    let opt = &options.optimizer;
    if !(opt.learning_rate.is_finite() && opt.learning_rate >= 0.0) {
        return Err(Error::Config(format!("invalid learning rate {}", opt.learning_rate)));
    }
    if opt.batch_size == 0 || opt.iterations == 0 {
        return Err(Error::Config("batch_size and iterations must be positive".into()));
    }
    if data.images.len() != data.labels.len() || data.images.len() != data.seg_targets.len() {
        return Err(Error::Data("images, labels and segmentation targets differ in count".into()));
    }
    if data.pool.is_empty() || opt.batch_size > data.pool.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} available training entries",
            opt.batch_size,
            data.pool.len()
        )));
    }
    if let Some(&bad) = data.pool.iter().find(|&&i| i >= data.images.len()) {
        return Err(Error::Data(format!("pool index {bad} out of range")));
    }
    let seg_len = graph.topology().segmentation_len();
    if let Some(bad) = data.seg_targets.iter().position(|s| s.len() != seg_len) {
        return Err(Error::Data(format!(
            "segmentation target {bad} has {} values, network emits {seg_len}",
            data.seg_targets[bad].len()
        )));
    }

    let start = Instant::now();
    let mut log = TrainingLog::default();
    let mut seg_batch = vec![0.0; opt.batch_size * seg_len];
    for iteration in 1..=opt.iterations {
        let batch: Vec<usize> = (0..opt.batch_size)
            .map(|_| data.pool[rng.below(data.pool.len())])
            .collect();
        let images: Vec<&Tensor> = batch.iter().map(|&i| &data.images[i]).collect();
        let labels: Vec<u8> = batch.iter().map(|&i| data.labels[i]).collect();
        for (dst, &i) in seg_batch.chunks_mut(seg_len).zip(&batch) {
            dst.copy_from_slice(&data.seg_targets[i]);
        }
        let seg = Tensor::new(vec![opt.batch_size, seg_len], seg_batch.clone())?;

        let out = graph.forward(&images)?;
        let (l_ce, l_euclid) = out.losses(&labels, &seg)?;
        let l_total = total_loss(l_ce, l_euclid, options.lambda);
        if !l_total.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                detail: format!("l_ce = {l_ce}, l_euclid = {l_euclid}"),
            });
        }
        graph.zero_grad();
        graph.backward(&out, &labels, &seg, options.lambda)?;
        sgd_step(graph.params_mut(), opt);

        let record = LogRecord {
            iteration,
            l_total,
            l_ce,
            l_euclid,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        callbacks.on_iteration(&record)?;
        log.records.push(record);
        if (options.checkpoint_every > 0 && iteration % options.checkpoint_every == 0)
            || iteration == opt.iterations
        {
            callbacks.on_checkpoint(iteration, graph)?;
        }
    }
    Ok(log)
}
