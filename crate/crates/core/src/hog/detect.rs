use std::fmt::Write as _;

use rayon::prelude::*;

use super::classifier::LinearClassifier;
use super::descriptor::{GrayImage, HogMap, HogParams};
use crate::error::{Error, Result};

/// A scored box in original image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl Detection {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn iou(&self, other: &Detection) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        inter / (self.area() + other.area() - inter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectParams {
    pub hog: HogParams,
    /// Pyramid scale factors applied to the image.
    pub scales: Vec<f64>,
    /// Window stride in pixels; a multiple of the cell size.
    pub stride: usize,
    pub threshold: f64,
    pub nms_iou: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            hog: HogParams::default(),
            scales: vec![1.0, 1.0 / 1.25, 1.0 / (1.25 * 1.25)],
            stride: 8,
            threshold: -1.0,
            nms_iou: 0.5,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        self.hog.validate()?;
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("bad pyramid scales {:?}", self.scales)));
        }
        if self.stride == 0 || self.stride % self.hog.cell != 0 {
            return Err(Error::Config(format!(
                "window stride {} must be a positive multiple of the cell size {}",
                self.stride, self.hog.cell
            )));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::Config(format!("nms_iou {} outside [0, 1]", self.nms_iou)));
        }
        Ok(())
    }
}

/// One resampled copy of an image with its HoG features.
pub struct PyramidLevel {
    pub scale: f64,
    pub image: GrayImage,
    pub map: HogMap,
}

/// Levels whose resampled image still fits one window; coarser levels are
/// skipped.
pub fn pyramid(img: &GrayImage, params: &DetectParams) -> Result<Vec<PyramidLevel>> {
    let mut levels = Vec::new();
    for &scale in &params.scales {
        let w = (img.width as f64 * scale).round() as usize;
        let h = (img.height as f64 * scale).round() as usize;
        if w < params.hog.window_width || h < params.hog.window_height {
            continue;
        }
        let image = if w == img.width && h == img.height {
            img.clone()
        } else {
            img.resize(w, h)
        };
        let map = HogMap::new(&image, &params.hog)?;
        levels.push(PyramidLevel { scale, image, map });
    }
    Ok(levels)
}

/// Greedy suppression: keep the best remaining box, drop everything
/// overlapping it by more than `iou`. Input order breaks score ties.
pub fn nms(mut dets: Vec<Detection>, iou: f64) -> Vec<Detection> {
    // stable sort keeps scan order among equal scores
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut keep: Vec<Detection> = Vec::new();
    for d in dets {
        if keep.iter().all(|k| k.iou(&d) <= iou) {
            keep.push(d);
        }
    }
    keep
}

/// All windows of every level scored, in scan order (level, row, column).
pub fn score_windows(
    img: &GrayImage,
    clf: &LinearClassifier,
    params: &DetectParams,
) -> Result<Vec<Detection>> {
    params.validate()?;
    if clf.weights.len() != params.hog.descriptor_len() {
        return Err(Error::contract(
            "detect",
            format!(
                "classifier has {} weights, descriptor has {}",
                clf.weights.len(),
                params.hog.descriptor_len()
            ),
        ));
    }
    let step = params.stride / params.hog.cell;
    let mut out = Vec::new();
    for level in pyramid(img, params)? {
        let (nx, ny) = level.map.window_positions();
        let rows: Vec<Vec<Detection>> = (0..ny)
            .step_by(step)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|cy| {
                (0..nx)
                    .step_by(step)
                    .map(|cx| {
                        let score = level.map.window_dot(cx, cy, &clf.weights) + clf.bias;
                        to_image_box(cx, cy, score, &level, img, &params.hog)
                    })
                    .collect()
            })
            .collect();
        out.extend(rows.into_iter().flatten());
    }
    Ok(out)
}

fn to_image_box(
    cx: usize,
    cy: usize,
    score: f64,
    level: &PyramidLevel,
    img: &GrayImage,
    hog: &HogParams,
) -> Detection {
    let sx = img.width as f64 / level.image.width as f64;
    let sy = img.height as f64 / level.image.height as f64;
    let x = (cx * hog.cell) as f64 * sx;
    let y = (cy * hog.cell) as f64 * sy;
    let w = (hog.window_width as f64 * sx).min(img.width as f64 - x);
    let h = (hog.window_height as f64 * sy).min(img.height as f64 - y);
    Detection { x, y, w, h, score }
}

/// Sliding-window detection over the pyramid followed by NMS.
pub fn detect(img: &GrayImage, clf: &LinearClassifier, params: &DetectParams) -> Result<Vec<Detection>> {
    let scored = score_windows(img, clf, params)?;
    let kept: Vec<Detection> = scored.into_iter().filter(|d| d.score > params.threshold).collect();
    Ok(nms(kept, params.nms_iou))
}

/// Inclusive pixel rectangle `(x0, y0)`-`(x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiRule {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl RoiRule {
    pub const REFERENCE_WIDTH: usize = 512;
    pub const REFERENCE_HEIGHT: usize = 256;

    /// The central band of a 512x256 frame.
    pub fn reference() -> Self {
        Self {
            x0: 128,
            y0: 0,
            x1: 383,
            y1: 255,
        }
    }

    /// The reference rectangle scaled to a `width` x `height` frame.
    pub fn scaled(width: usize, height: usize) -> Self {
        let r = Self::reference();
        let sx = |v: usize| v * width / Self::REFERENCE_WIDTH;
        let sy = |v: usize| v * height / Self::REFERENCE_HEIGHT;
        Self {
            x0: sx(r.x0),
            y0: sy(r.y0),
            x1: sx(r.x1 + 1) - 1,
            y1: sy(r.y1 + 1) - 1,
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.x0 < self.x1 && self.y0 < self.y1 && self.x1 < width && self.y1 < height {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "ROI {self:?} is empty or outside a {width}x{height} image"
            )))
        }
    }

    /// Whether a point lies in the area covered by the ROI pixels.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 as f64 && x < (self.x1 + 1) as f64 && y >= self.y0 as f64 && y < (self.y1 + 1) as f64
    }
}

/// Highest score among detections centered in the ROI, or negative infinity.
pub fn warning_decision(dets: &[Detection], roi: &RoiRule) -> f64 {
    dets.iter()
        .filter(|d| {
            let (cx, cy) = d.center();
            roi.contains(cx, cy)
        })
        .map(|d| d.score)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub const DETECTIONS_HEADER: &str = "image,x,y,w,h,score";

pub fn detections_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a Detection)>) -> String {
    let mut s = format!("{DETECTIONS_HEADER}\n");
    for (image, d) in rows {
        let _ = writeln!(s, "{image},{},{},{},{},{}", d.x, d.y, d.w, d.h, d.score);
    }
    s
}
