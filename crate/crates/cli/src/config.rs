//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. Every key is optional; missing keys
//! take the full-scale defaults (512x256 input, batch 128, lr 0.001, weight
//! decay 0.0001, 2000 iterations, lambda 0.001).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use pcw_core::datagen::{DatasetSpec, SceneParams, Split};
use pcw_core::hog::pipeline::BaselineConfig;
use pcw_core::hog::{ClassifierTraining, DetectParams, RoiRule};
use pcw_core::model::{ArchitectureConfig, TrainOptions};
use pcw_core::optim::OptimizerConfig;
use pcw_core::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,

    pub train_count: usize,
    pub test_count: usize,
    pub warning_fraction: f64,
    pub supersample: usize,
    pub noise_amplitude: f64,

    pub scale_divisor: usize,
    pub lambda: f64,

    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub checkpoint_every: usize,

    pub hog_epochs: usize,
    pub hog_learning_rate: f64,
    pub hog_regularization: f64,
    pub hog_negatives_per_image: usize,
    pub hog_hard_negatives_per_image: usize,
    pub hog_threshold: f64,
    pub hog_stride: usize,

    pub fpr_target: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        let hog = ClassifierTraining::default();
        let base = BaselineConfig::default();
        Self {
            seed: 0,
            out: PathBuf::from("runs/default"),
            train_count: 2975,
            test_count: 1525,
            warning_fraction: 1.0 / 6.0,
            supersample: 2,
            noise_amplitude: SceneParams::default().noise_amplitude,
            scale_divisor: 1,
            lambda: ArchitectureConfig::default().lambda,
            learning_rate: opt.learning_rate,
            weight_decay: opt.weight_decay,
            batch_size: opt.batch_size,
            iterations: opt.iterations,
            checkpoint_every: 500,
            hog_epochs: hog.epochs,
            hog_learning_rate: hog.learning_rate,
            hog_regularization: hog.regularization,
            hog_negatives_per_image: base.negatives_per_image,
            hog_hard_negatives_per_image: base.hard_negatives_per_image,
            hog_threshold: base.detect.threshold,
            hog_stride: base.detect.stride,
            fpr_target: 0.15,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .ok()
        .with_context(|| format!("config field `{key}`: `{value}` is not {what}"))
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        const UINT: &str = "a non-negative integer";
        const REAL: &str = "a real number";
        match key {
            "seed" => self.seed = parse(key, value, "an unsigned 64-bit integer")?,
            "out" => self.out = PathBuf::from(value),
            "train_count" => self.train_count = parse(key, value, UINT)?,
            "test_count" => self.test_count = parse(key, value, UINT)?,
            "warning_fraction" => self.warning_fraction = parse(key, value, REAL)?,
            "supersample" => self.supersample = parse(key, value, UINT)?,
            "noise_amplitude" => self.noise_amplitude = parse(key, value, REAL)?,
            "scale_divisor" => self.scale_divisor = parse(key, value, UINT)?,
            "lambda" => self.lambda = parse(key, value, REAL)?,
            "learning_rate" => self.learning_rate = parse(key, value, REAL)?,
            "weight_decay" => self.weight_decay = parse(key, value, REAL)?,
            "batch_size" => self.batch_size = parse(key, value, UINT)?,
            "iterations" => self.iterations = parse(key, value, UINT)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value, UINT)?,
            "hog_epochs" => self.hog_epochs = parse(key, value, UINT)?,
            "hog_learning_rate" => self.hog_learning_rate = parse(key, value, REAL)?,
            "hog_regularization" => self.hog_regularization = parse(key, value, REAL)?,
            "hog_negatives_per_image" => self.hog_negatives_per_image = parse(key, value, UINT)?,
            "hog_hard_negatives_per_image" => {
                self.hog_hard_negatives_per_image = parse(key, value, UINT)?
            }
            "hog_threshold" => self.hog_threshold = parse(key, value, REAL)?,
            "hog_stride" => self.hog_stride = parse(key, value, UINT)?,
            "fpr_target" => self.fpr_target = parse(key, value, REAL)?,
            _ => bail!("unknown config field `{key}`"),
        }
        Ok(())
    }

    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", origin.display(), n + 1);
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                bail!("{}:{}: config field `{key}` given twice", origin.display(), n + 1);
            }
            cfg.set(key, value.trim())
                .with_context(|| format!("{}:{}", origin.display(), n + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, constraint: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                bail!("invalid config field `{field}`: must be {constraint}")
            }
        };
        check(self.train_count >= 1, "train_count", "at least 1")?;
        check(self.test_count >= 1, "test_count", "at least 1")?;
        check(
            self.warning_fraction > 0.0 && self.warning_fraction < 1.0,
            "warning_fraction",
            "strictly between 0 and 1",
        )?;
        check(self.supersample >= 1, "supersample", "at least 1")?;
        check(
            (0.0..=0.5).contains(&self.noise_amplitude),
            "noise_amplitude",
            "in [0, 0.5]",
        )?;
        check(self.scale_divisor >= 1, "scale_divisor", "a positive integer")?;
        check(self.lambda.is_finite() && self.lambda >= 0.0, "lambda", "a non-negative real")?;
        check(
            self.learning_rate.is_finite() && self.learning_rate > 0.0,
            "learning_rate",
            "a positive real",
        )?;
        check(
            self.weight_decay.is_finite() && self.weight_decay >= 0.0,
            "weight_decay",
            "a non-negative real",
        )?;
        check(self.batch_size >= 1, "batch_size", "at least 1")?;
        check(self.iterations >= 1, "iterations", "at least 1")?;
        check(self.checkpoint_every >= 1, "checkpoint_every", "at least 1")?;
        check(self.hog_epochs >= 1, "hog_epochs", "at least 1")?;
        check(self.hog_learning_rate > 0.0, "hog_learning_rate", "a positive real")?;
        check(self.hog_regularization >= 0.0, "hog_regularization", "a non-negative real")?;
        check(
            self.hog_stride >= 8 && self.hog_stride % 8 == 0,
            "hog_stride",
            "a positive multiple of the 8-pixel cell",
        )?;
        check(!self.hog_threshold.is_nan(), "hog_threshold", "a real number")?;
        check((0.0..=1.0).contains(&self.fpr_target), "fpr_target", "in [0, 1]")?;
        pcw_core::model::Topology::plan(&self.architecture())
            .map_err(|e| anyhow::anyhow!("invalid config field `scale_divisor`: {e}"))?;
        self.dataset(Split::Train)
            .params
            .validate()
            .map_err(|e| anyhow::anyhow!("invalid config field `noise_amplitude`: {e}"))?;
        Ok(())
    }

    /// Canonical text: every field except `out`, one per line, sorted.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("batch_size", self.batch_size.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("fpr_target", format!("{:?}", self.fpr_target));
        kv("hog_epochs", self.hog_epochs.to_string());
        kv("hog_hard_negatives_per_image", self.hog_hard_negatives_per_image.to_string());
        kv("hog_learning_rate", format!("{:?}", self.hog_learning_rate));
        kv("hog_negatives_per_image", self.hog_negatives_per_image.to_string());
        kv("hog_regularization", format!("{:?}", self.hog_regularization));
        kv("hog_stride", self.hog_stride.to_string());
        kv("hog_threshold", format!("{:?}", self.hog_threshold));
        kv("iterations", self.iterations.to_string());
        kv("lambda", format!("{:?}", self.lambda));
        kv("learning_rate", format!("{:?}", self.learning_rate));
        kv("noise_amplitude", format!("{:?}", self.noise_amplitude));
        kv("scale_divisor", self.scale_divisor.to_string());
        kv("seed", self.seed.to_string());
        kv("supersample", self.supersample.to_string());
        kv("test_count", self.test_count.to_string());
        kv("train_count", self.train_count.to_string());
        kv("warning_fraction", format!("{:?}", self.warning_fraction));
        kv("weight_decay", format!("{:?}", self.weight_decay));
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn architecture(&self) -> ArchitectureConfig {
        ArchitectureConfig {
            lambda: self.lambda,
            ..ArchitectureConfig::with_scale(self.scale_divisor)
        }
    }

    pub fn dataset(&self, split: Split) -> DatasetSpec {
        let arch = self.architecture();
        let (count, label) = match split {
            Split::Train => (self.train_count, "train-data"),
            Split::Test => (self.test_count, "test-data"),
        };
        DatasetSpec {
            split,
            count,
            width: arch.input_width(),
            height: arch.input_height(),
            supersample: self.supersample,
            warning_fraction: self.warning_fraction,
            params: SceneParams {
                noise_amplitude: self.noise_amplitude,
                ..SceneParams::default()
            },
            seed: Rng::named(self.seed, label).seed(),
        }
    }

    pub fn train_options(&self, lambda: f64) -> TrainOptions {
        TrainOptions {
            checkpoint_every: self.checkpoint_every,
            ..TrainOptions::new(
                OptimizerConfig {
                    learning_rate: self.learning_rate,
                    weight_decay: self.weight_decay,
                    batch_size: self.batch_size,
                    iterations: self.iterations,
                },
                lambda,
            )
        }
    }

    pub fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            detect: DetectParams {
                threshold: self.hog_threshold,
                stride: self.hog_stride,
                ..DetectParams::default()
            },
            training: ClassifierTraining {
                epochs: self.hog_epochs,
                learning_rate: self.hog_learning_rate,
                regularization: self.hog_regularization,
                seed: Rng::named(self.seed, "hog").seed(),
            },
            roi: RoiRule::reference(),
            negatives_per_image: self.hog_negatives_per_image,
            hard_negatives_per_image: self.hog_hard_negatives_per_image,
            ..BaselineConfig::default()
        }
    }
}
