//! The detection baseline end to end: scenes are re-rendered at the
//! reference resolution, classifier windows are cropped from the pyramid
//! feature maps, and each test image is reduced to one warning score.

use rayon::prelude::*;

use super::classifier::{accuracy, train_linear_classifier, ClassifierTraining, LinearClassifier};
use super::descriptor::GrayImage;
use super::detect::{detect, pyramid, warning_decision, DetectParams, Detection, PyramidLevel, RoiRule};
use crate::datagen::{render_image, AgentKind, Scene};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MIN_SAMPLES_PER_CLASS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub detect: DetectParams,
    pub training: ClassifierTraining,
    pub width: usize,
    pub height: usize,
    pub roi: RoiRule,
    /// Person height (pixels) the window is centered on during training.
    pub target_height: f64,
    pub negatives_per_image: usize,
    pub hard_negatives_per_image: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            detect: DetectParams::default(),
            training: ClassifierTraining::default(),
            width: RoiRule::REFERENCE_WIDTH,
            height: RoiRule::REFERENCE_HEIGHT,
            roi: RoiRule::reference(),
            target_height: 96.0,
            negatives_per_image: 10,
            hard_negatives_per_image: 3,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        self.detect.validate()?;
        self.roi.validate(self.width, self.height)?;
        if !(self.target_height > 0.0) {
            return Err(Error::Config("target_height must be positive".into()));
        }
        Ok(())
    }
}

pub fn render_gray(scene: &Scene, width: usize, height: usize) -> GrayImage {
    GrayImage::from_rgb(&render_image(scene, width, height, 1))
}

/// Pixel boxes of the pedestrians and cyclists in a scene.
pub fn person_boxes(scene: &Scene, width: usize, height: usize) -> Vec<(AgentKind, Detection)> {
    scene
        .agents
        .iter()
        .filter(|a| a.kind.is_vulnerable())
        .map(|a| {
            let (w, h) = (width as f64, height as f64);
            let b = Detection {
                x: a.x0 * w,
                y: a.y0 * h,
                w: (a.x1 - a.x0) * w,
                h: (a.y1 - a.y0) * h,
                score: 0.0,
            };
            (a.kind, b)
        })
        .collect()
}

/// A window counts as showing a person if it overlaps the person box
/// substantially or holds most of it.
fn shows_person(window: &Detection, person: &Detection) -> bool {
    let ix = (window.x + window.w).min(person.x + person.w) - window.x.max(person.x);
    let iy = (window.y + window.h).min(person.y + person.h) - window.y.max(person.y);
    let covered = if ix > 0.0 && iy > 0.0 { ix * iy / person.area() } else { 0.0 };
    window.iou(person) >= 0.2 || covered >= 0.5
}

fn window_box(level: &PyramidLevel, cx: usize, cy: usize, img: &GrayImage, cfg: &BaselineConfig) -> Detection {
    let sx = img.width as f64 / level.image.width as f64;
    let sy = img.height as f64 / level.image.height as f64;
    let hog = &cfg.detect.hog;
    Detection {
        x: (cx * hog.cell) as f64 * sx,
        y: (cy * hog.cell) as f64 * sy,
        w: hog.window_width as f64 * sx,
        h: hog.window_height as f64 * sy,
        score: 0.0,
    }
}

#[derive(Debug, Clone, Default)]
pub struct WindowSet {
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

impl WindowSet {
    fn extend(&mut self, other: WindowSet) {
        self.positives.extend(other.positives);
        self.negatives.extend(other.negatives);
    }
}

/// Pedestrian windows (one per pedestrian, at the level that brings its
/// height closest to the target) and random background windows.
fn scene_windows(scene: &Scene, cfg: &BaselineConfig, rng: &mut Rng) -> Result<WindowSet> {
    let img = render_gray(scene, cfg.width, cfg.height);
    let levels = pyramid(&img, &cfg.detect)?;
    let people = person_boxes(scene, cfg.width, cfg.height);
    let mut set = WindowSet::default();
    if levels.is_empty() {
        return Ok(set);
    }
    let hog = &cfg.detect.hog;
    let mut buf = Vec::new();
    for (kind, b) in &people {
        if *kind != AgentKind::Pedestrian {
            continue;
        }
        let level = levels
            .iter()
            .min_by(|l1, l2| {
                let d = |l: &PyramidLevel| (b.h * l.scale / cfg.target_height).ln().abs();
                d(l1).total_cmp(&d(l2))
            })
            .expect("non-empty pyramid");
        let (nx, ny) = level.map.window_positions();
        let (cxp, cyp) = b.center();
        let to_cell = |c: f64, half: usize, n: usize| {
            ((c * level.scale - half as f64) / hog.cell as f64).round().clamp(0.0, (n - 1) as f64) as usize
        };
        let cx = to_cell(cxp, hog.window_width / 2, nx);
        let cy = to_cell(cyp, hog.window_height / 2, ny);
        level.map.window(cx, cy, &mut buf);
        set.positives.push(buf.clone());
    }
    let mut tries = 0;
    while set.negatives.len() < cfg.negatives_per_image && tries < 50 * cfg.negatives_per_image {
        tries += 1;
        let level = &levels[rng.below(levels.len())];
        let (nx, ny) = level.map.window_positions();
        let (cx, cy) = (rng.below(nx), rng.below(ny));
        let wb = window_box(level, cx, cy, &img, cfg);
        if people.iter().any(|(_, p)| shows_person(&wb, p)) {
            continue;
        }
        level.map.window(cx, cy, &mut buf);
        set.negatives.push(buf.clone());
    }
    Ok(set)
}

/// The highest-scoring background windows that violate the margin.
fn hard_negatives(scene: &Scene, clf: &LinearClassifier, cfg: &BaselineConfig) -> Result<Vec<Vec<f64>>> {
    let img = render_gray(scene, cfg.width, cfg.height);
    let people = person_boxes(scene, cfg.width, cfg.height);
    let step = cfg.detect.stride / cfg.detect.hog.cell;
    let levels = pyramid(&img, &cfg.detect)?;
    let mut cands = Vec::new();
    for (li, level) in levels.iter().enumerate() {
        let (nx, ny) = level.map.window_positions();
        for cy in (0..ny).step_by(step) {
            for cx in (0..nx).step_by(step) {
                let s = level.map.window_dot(cx, cy, &clf.weights) + clf.bias;
                if s > -1.0 {
                    let wb = window_box(level, cx, cy, &img, cfg);
                    if !people.iter().any(|(_, p)| shows_person(&wb, p)) {
                        cands.push((s, li, cx, cy));
                    }
                }
            }
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(cands
        .into_iter()
        .take(cfg.hard_negatives_per_image)
        .map(|(_, li, cx, cy)| {
            let mut v = Vec::new();
            levels[li].map.window(cx, cy, &mut v);
            v
        })
        .collect())
}

/// Windows for every scene, each scene with its own derived seed.
pub fn collect_windows(scenes: &[Scene], cfg: &BaselineConfig, seed: u64) -> Result<WindowSet> {
    let base = Rng::named(seed, "hog-windows").seed();
    let parts: Vec<WindowSet> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| scene_windows(s, cfg, &mut Rng::derive(base, i as u64)))
        .collect::<Result<_>>()?;
    let mut all = WindowSet::default();
    parts.into_iter().for_each(|p| all.extend(p));
    Ok(all)
}

#[derive(Debug, Clone)]
pub struct BaselineModel {
    pub classifier: LinearClassifier,
    pub train_accuracy: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// Trains on random negatives, adds one round of hard negatives mined from
/// the same scenes and retrains.
pub fn train_baseline(scenes: &[Scene], cfg: &BaselineConfig) -> Result<BaselineModel> {
    cfg.validate()?;
    let mut set = collect_windows(scenes, cfg, cfg.training.seed)?;
    if set.positives.len() < MIN_SAMPLES_PER_CLASS || set.negatives.len() < MIN_SAMPLES_PER_CLASS {
        return Err(Error::Data(format!(
            "baseline needs at least {MIN_SAMPLES_PER_CLASS} windows per class, got {} positives and {} negatives",
            set.positives.len(),
            set.negatives.len()
        )));
    }
    let (first, _) = train_linear_classifier(&set.positives, &set.negatives, &cfg.training)?;
    if cfg.hard_negatives_per_image > 0 {
        let mined: Vec<Vec<Vec<f64>>> = scenes
            .par_iter()
            .map(|s| hard_negatives(s, &first, cfg))
            .collect::<Result<_>>()?;
        set.negatives.extend(mined.into_iter().flatten());
    }
    let (classifier, train_accuracy) =
        train_linear_classifier(&set.positives, &set.negatives, &cfg.training)?;
    Ok(BaselineModel {
        classifier,
        train_accuracy,
        positives: set.positives.len(),
        negatives: set.negatives.len(),
    })
}

/// Accuracy on pedestrian and background windows cropped from `scenes`.
pub fn window_accuracy(scenes: &[Scene], clf: &LinearClassifier, cfg: &BaselineConfig, seed: u64) -> Result<f64> {
    let set = collect_windows(scenes, cfg, seed)?;
    if set.positives.is_empty() || set.negatives.is_empty() {
        return Err(Error::Data("held-out scenes yield no windows of one class".into()));
    }
    Ok(accuracy(clf, &set.positives, &set.negatives))
}

/// Detections and the ROI warning score of one scene.
pub fn score_scene(scene: &Scene, clf: &LinearClassifier, cfg: &BaselineConfig) -> Result<(Vec<Detection>, f64)> {
    let img = render_gray(scene, cfg.width, cfg.height);
    let dets = detect(&img, clf, &cfg.detect)?;
    let score = warning_decision(&dets, &cfg.roi);
    Ok((dets, score))
}
