use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pcw_core::datagen::{self, balance_indices, generate_dataset, load_all, read_dataset, DatasetInfo, Split};
use pcw_core::eval::{compare, render_svg, Report, ScoredSet};
use pcw_core::hog::pipeline::{score_scene, train_baseline, window_accuracy};
use pcw_core::hog::detections_csv;
use pcw_core::model::{train, LogRecord, NetworkGraph, TrainCallbacks, TrainData, TrainingLog};
use pcw_core::Rng;

use crate::config::ExperimentConfig;
use crate::record::RunRecord;

/// Trailing window (iterations) of the smoothed loss reported after training.
pub const SMOOTHING_WINDOW: usize = 50;

pub const HOG: &str = "hog";
pub const CNN_NO_SEG: &str = "cnn_no_seg";
pub const CNN_WITH_SEG: &str = "cnn_with_seg";

/// Where each stage reads and writes below the output root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self { root: cfg.out.clone() }
    }

    pub fn data(&self, split: Split) -> PathBuf {
        self.root.join("data").join(split.as_str())
    }

    pub fn train_dir(&self, lambda: f64) -> PathBuf {
        self.root.join("train").join(format!("lambda_{lambda}"))
    }

    pub fn baseline_dir(&self) -> PathBuf {
        self.root.join("baseline")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }
}

fn require(path: &Path, command: &str) -> Result<()> {
    if !path.exists() {
        bail!("missing {}: run `{command}` first", path.display());
    }
    Ok(())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

/// Loads a generated split and checks it was produced by this config.
fn open_split(cfg: &ExperimentConfig, layout: &Layout, split: Split) -> Result<(DatasetInfo, datagen::Manifest)> {
    let dir = layout.data(split);
    require(&dir.join(datagen::SIDECAR_FILE), "pcw generate")?;
    let info = DatasetInfo::read(&dir)?;
    if info.spec != cfg.dataset(split) {
        bail!(
            "{} was generated with different settings; rerun `pcw generate` with this config",
            dir.display()
        );
    }
    Ok((info, read_dataset(&dir)?))
}

pub fn generate(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let mut record = RunRecord::new("generate", cfg);
    for split in [Split::Train, Split::Test] {
        let dir = layout.data(split);
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        let manifest = generate_dataset(&dir, &cfg.dataset(split))?;
        eprintln!(
            "generated {} {} images ({} warning) in {}",
            manifest.entries.len(),
            split.as_str(),
            manifest.count(1),
            dir.display()
        );
        record.output_dir(&layout.root, &dir)?;
    }
    record.write(&layout.root.join("data"))?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub lambda: f64,
    pub iterations: usize,
    pub parameter_count: usize,
    pub smoothed_loss_at_10: f64,
    pub smoothed_loss_final: f64,
    pub train_accuracy: f64,
}

struct Checkpoints<'a> {
    dir: &'a Path,
    iterations: usize,
}

impl TrainCallbacks for Checkpoints<'_> {
    fn on_iteration(&mut self, r: &LogRecord) -> pcw_core::Result<()> {
        if r.iteration % 100 == 0 || r.iteration == self.iterations {
            eprintln!(
                "  iter {:>5}/{}  L_t {:.5}  L_c {:.5}  L_e {:.5}",
                r.iteration, self.iterations, r.l_total, r.l_ce, r.l_euclid
            );
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, iteration: usize, graph: &NetworkGraph) -> pcw_core::Result<()> {
        graph.save(&self.dir.join(format!("iter_{iteration:05}.ckpt")))
    }
}

/// Fraction of images whose thresholded warning probability matches the label.
pub fn warning_accuracy(scores: &[f64], labels: &[u8]) -> f64 {
    let right = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| u8::from(s >= 0.5) == l)
        .count();
    right as f64 / labels.len() as f64
}

/// Trains the network with segmentation weight `lambda` on the balanced
/// training split.
pub fn train_model(cfg: &ExperimentConfig, lambda: f64) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let (_, manifest) = open_split(cfg, &layout, Split::Train)?;
    let samples = load_all(&manifest)?;
    let labels: Vec<u8> = samples.iter().map(|s| s.warning).collect();
    let seg: Vec<Vec<f64>> = samples.iter().map(|s| s.seg_target()).collect();
    let images: Vec<_> = samples.into_iter().map(|s| s.image).collect();
    let pool = balance_indices(&labels)?;

    let dir = layout.train_dir(lambda);
    let ckpt_dir = dir.join("checkpoints");
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&ckpt_dir)?;

    let arch = pcw_core::model::ArchitectureConfig {
        lambda,
        ..cfg.architecture()
    };
    // shared across lambdas so the two runs differ only in the loss
    let mut graph = NetworkGraph::build(&arch, &mut Rng::named(cfg.seed, "init"))?;
    let options = cfg.train_options(lambda);
    eprintln!(
        "training lambda={lambda}: {} parameters, {} images ({} after balancing)",
        graph.parameter_count(),
        images.len(),
        pool.len()
    );
    let data = TrainData {
        images: &images,
        labels: &labels,
        seg_targets: &seg,
        pool: &pool,
    };
    let mut cb = Checkpoints {
        dir: &ckpt_dir,
        iterations: cfg.iterations,
    };
    let log: TrainingLog = train(&mut graph, data, &options, &mut Rng::named(cfg.seed, "batches"), &mut cb)?;
    graph.save(&dir.join("model.ckpt"))?;
    write(&dir.join("log.csv"), log.to_csv())?;

    let scores = graph.predict_scores(&images)?;
    let summary = TrainSummary {
        lambda,
        iterations: cfg.iterations,
        parameter_count: graph.parameter_count(),
        smoothed_loss_at_10: log.smoothed_total(10.min(cfg.iterations), SMOOTHING_WINDOW).unwrap_or(f64::NAN),
        smoothed_loss_final: log.smoothed_total(cfg.iterations, SMOOTHING_WINDOW).unwrap_or(f64::NAN),
        train_accuracy: warning_accuracy(&scores, &labels),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    eprintln!(
        "trained lambda={lambda}: smoothed loss {:.4} -> {:.4}, training accuracy {:.2}%",
        summary.smoothed_loss_at_10,
        summary.smoothed_loss_final,
        100.0 * summary.train_accuracy
    );

    let mut record = RunRecord::new("train", cfg);
    record.input(&layout.root, &manifest.root.join(datagen::MANIFEST_FILE))?;
    record.input(&layout.root, &manifest.root.join(datagen::SIDECAR_FILE))?;
    record.output_dir(&layout.root, &dir)?;
    record.output_dir(&layout.root, &ckpt_dir)?;
    record.write(&dir)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub positives: usize,
    pub negatives: usize,
    pub train_accuracy: f64,
    pub held_out_window_accuracy: f64,
    pub test_images_with_detections: usize,
}

pub const SCORES_HEADER: &str = "image,score,label";

pub fn baseline(cfg: &ExperimentConfig) -> Result<BaselineSummary> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let (train_info, _) = open_split(cfg, &layout, Split::Train)?;
    let (test_info, test_manifest) = open_split(cfg, &layout, Split::Test)?;
    let bcfg = cfg.baseline();
    eprintln!("fitting HoG baseline on {} training scenes", train_info.scenes.len());
    let model = train_baseline(&train_info.scenes, &bcfg)?;
    let held_out = window_accuracy(
        &test_info.scenes,
        &model.classifier,
        &bcfg,
        Rng::named(cfg.seed, "hog-held-out").seed(),
    )?;
    let scored: Vec<_> = test_info
        .scenes
        .par_iter()
        .map(|s| score_scene(s, &model.classifier, &bcfg))
        .collect::<pcw_core::Result<_>>()?;

    let dir = layout.baseline_dir();
    fs::create_dir_all(&dir)?;
    model.classifier.save(&dir.join("hog.ckpt"))?;
    let names: Vec<&str> = test_manifest.entries.iter().map(|e| e.image.as_str()).collect();
    let rows = scored
        .iter()
        .zip(&names)
        .flat_map(|((dets, _), name)| dets.iter().map(move |d| (*name, d)));
    write(&dir.join("detections.csv"), detections_csv(rows))?;
    let mut scores = format!("{SCORES_HEADER}\n");
    for ((e, (_, score)), name) in test_manifest.entries.iter().zip(&scored).zip(&names) {
        let _ = writeln!(scores, "{name},{score},{}", e.warning);
    }
    write(&dir.join("scores.csv"), scores)?;
    let summary = BaselineSummary {
        positives: model.positives,
        negatives: model.negatives,
        train_accuracy: model.train_accuracy,
        held_out_window_accuracy: held_out,
        test_images_with_detections: scored.iter().filter(|(_, s)| s.is_finite()).count(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    eprintln!(
        "baseline: {} positive / {} negative windows, window accuracy {:.2}% train, {:.2}% held out",
        summary.positives,
        summary.negatives,
        100.0 * summary.train_accuracy,
        100.0 * summary.held_out_window_accuracy
    );

    let mut record = RunRecord::new("baseline", cfg);
    for split in [Split::Train, Split::Test] {
        record.input(&layout.root, &layout.data(split).join(datagen::SIDECAR_FILE))?;
    }
    record.output_dir(&layout.root, &dir)?;
    record.write(&dir)?;
    Ok(summary)
}

/// Reads `image,score,label` rows written by [`baseline`].
pub fn read_scores(path: &Path) -> Result<(Vec<String>, Vec<f64>, Vec<u8>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(SCORES_HEADER) {
        bail!("{}: expected header `{SCORES_HEADER}`", path.display());
    }
    let (mut names, mut scores, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || format!("{}:{}: malformed row `{line}`", path.display(), n + 2);
        if f.len() != 3 {
            bail!(bad());
        }
        names.push(f[0].to_string());
        scores.push(f[1].parse().ok().with_context(bad)?);
        labels.push(f[2].parse().ok().with_context(bad)?);
    }
    Ok((names, scores, labels))
}

fn cnn_scores(cfg: &ExperimentConfig, layout: &Layout, lambda: f64, images: &[pcw_core::Tensor]) -> Result<Vec<f64>> {
    let path = layout.train_dir(lambda).join("model.ckpt");
    require(&path, &format!("pcw train --lambda {lambda}"))?;
    let arch = pcw_core::model::ArchitectureConfig {
        lambda,
        ..cfg.architecture()
    };
    let graph = NetworkGraph::load(&arch, &path)?;
    Ok(graph.predict_scores(images)?)
}

/// Scores the test split with all three methods and writes the comparison.
pub fn eval(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    if cfg.lambda <= 0.0 {
        bail!("invalid config field `lambda`: must be positive for eval (the lambda = 0 model is the reference)");
    }
    let layout = Layout::new(cfg);
    let (_, manifest) = open_split(cfg, &layout, Split::Test)?;
    let hog_path = layout.baseline_dir().join("scores.csv");
    require(&hog_path, "pcw baseline")?;
    let (names, hog, hog_labels) = read_scores(&hog_path)?;
    let labels = manifest.labels();
    let entry_names: Vec<&str> = manifest.entries.iter().map(|e| e.image.as_str()).collect();
    if hog_labels != labels || names != entry_names {
        bail!("{} does not match the test split; rerun `pcw baseline`", hog_path.display());
    }
    let images: Vec<_> = load_all(&manifest)?.into_iter().map(|s| s.image).collect();
    let no_seg = cnn_scores(cfg, &layout, 0.0, &images)?;
    let with_seg = cnn_scores(cfg, &layout, cfg.lambda, &images)?;
    let sets = [
        ScoredSet::new(HOG, hog, labels.clone())?,
        ScoredSet::new(CNN_NO_SEG, no_seg, labels.clone())?,
        ScoredSet::new(CNN_WITH_SEG, with_seg, labels.clone())?,
    ];
    let report = compare(&sets, cfg.fpr_target)?;

    let dir = layout.eval_dir();
    fs::create_dir_all(&dir)?;
    write(&dir.join("report.csv"), report.to_csv())?;
    write(&dir.join("report.txt"), report.to_table())?;
    write(&dir.join("roc.svg"), render_svg(&report))?;
    for (set, curve) in sets.iter().zip(&report.curves) {
        write(&dir.join(format!("roc_{}.csv", set.method)), curve.to_csv())?;
    }
    let mut scores = format!("image,label,{HOG},{CNN_NO_SEG},{CNN_WITH_SEG}\n");
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(
            scores,
            "{name},{},{},{},{}",
            labels[i], sets[0].scores[i], sets[1].scores[i], sets[2].scores[i]
        );
    }
    write(&dir.join("scores.csv"), scores)?;

    let mut record = RunRecord::new("eval", cfg);
    record.input(&layout.root, &hog_path)?;
    record.input(&layout.root, &layout.train_dir(0.0).join("model.ckpt"))?;
    record.input(&layout.root, &layout.train_dir(cfg.lambda).join("model.ckpt"))?;
    record.output_dir(&layout.root, &dir)?;
    record.write(&dir)?;
    Ok(report)
}

/// generate, train at lambda 0 and at the configured lambda, baseline, eval.
pub fn repro(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    if cfg.lambda <= 0.0 {
        bail!("invalid config field `lambda`: must be positive for repro (lambda = 0 is trained as the reference)");
    }
    generate(cfg)?;
    train_model(cfg, 0.0)?;
    train_model(cfg, cfg.lambda)?;
    baseline(cfg)?;
    let report = eval(cfg)?;

    let layout = Layout::new(cfg);
    let mut record = RunRecord::new("repro", cfg);
    let stages = [
        layout.root.join("data"),
        layout.train_dir(0.0),
        layout.train_dir(cfg.lambda),
        layout.baseline_dir(),
        layout.eval_dir(),
    ];
    for stage in &stages {
        record.outputs.extend(RunRecord::read(stage)?.outputs);
    }
    record.write(&layout.root)?;
    Ok(report)
}
