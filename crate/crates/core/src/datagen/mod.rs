//! Synthetic street scenes with per-pixel labels and warning labels.
//!
//! A dataset directory holds `NNNNN.ppm` images, `NNNNN.pgm` class maps,
//! `manifest.csv` and a `dataset.json` sidecar recording the generation
//! settings and every scene's geometry (so the same scenes can be re-rendered
//! at another resolution).

mod manifest;
pub mod pnm;
mod render;
mod scene;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub use manifest::{Manifest, ManifestEntry, Split, MANIFEST_FILE, MANIFEST_HEADER};
pub use render::{agent_paint, color_at, render_image, render_labels, to_gray};
pub use scene::{
    footprint_on_road, sample_scene, Agent, AgentKind, Palette, RoadGeometry, Scene, SceneParams,
    SegClass, NUM_CLASSES,
};

pub const SIDECAR_FILE: &str = "dataset.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub split: Split,
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub supersample: usize,
    pub warning_fraction: f64,
    pub params: SceneParams,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(split: Split, count: usize, width: usize, height: usize, seed: u64) -> Self {
        Self {
            split,
            count,
            width,
            height,
            supersample: 2,
            warning_fraction: 1.0 / 6.0,
            params: SceneParams::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("dataset count must be at least 1".into()));
        }
        if !(self.warning_fraction > 0.0 && self.warning_fraction < 1.0) {
            return Err(Error::Config(format!(
                "warning_fraction {} must lie strictly between 0 and 1",
                self.warning_fraction
            )));
        }
        if self.width == 0 || self.height == 0 || self.supersample == 0 {
            return Err(Error::Config("image size and supersample must be positive".into()));
        }
        self.params.validate()
    }

    pub fn warning_count(&self) -> usize {
        (self.count as f64 * self.warning_fraction).round() as usize
    }
}

/// Contents of `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub spec: DatasetSpec,
    pub scenes: Vec<Scene>,
}

impl DatasetInfo {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SIDECAR_FILE);
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path,
            offset: byte_offset(&text, e.line(), e.column()),
            msg: e.to_string(),
        })
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    start + column.saturating_sub(1)
}

/// Per-sample warning labels: exactly `warning_count` ones in seeded order.
pub fn assign_labels(spec: &DatasetSpec) -> Vec<bool> {
    let n_warn = spec.warning_count();
    let mut labels: Vec<bool> = (0..spec.count).map(|i| i < n_warn).collect();
    Rng::named(spec.seed, "labels").shuffle(&mut labels);
    labels
}

/// Scene `i` of a dataset. Independent of every other sample.
pub fn dataset_scene(spec: &DatasetSpec, index: usize, warning: bool) -> Result<Scene> {
    let mut rng = Rng::derive(Rng::named(spec.seed, "scenes").seed(), index as u64);
    sample_scene(&spec.params, warning, &mut rng)
}

/// Generates the scenes of a dataset without touching the filesystem.
pub fn generate_scenes(spec: &DatasetSpec) -> Result<Vec<Scene>> {
    spec.validate()?;
    assign_labels(spec)
        .into_par_iter()
        .enumerate()
        .map(|(i, w)| dataset_scene(spec, i, w))
        .collect()
}

/// Renders and writes a dataset into `dir` (created if missing).
pub fn generate_dataset(dir: &Path, spec: &DatasetSpec) -> Result<Manifest> {
    let scenes = generate_scenes(spec)?;
    fs::create_dir_all(dir)?;
    let entries = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let image = format!("{i:05}.ppm");
            let seg = format!("{i:05}.pgm");
            let img = render_image(scene, spec.width, spec.height, spec.supersample);
            let rgb = pnm::image_to_rgb8(&img);
            fs::write(dir.join(&image), pnm::encode_ppm(spec.width, spec.height, &rgb))?;
            let labels = render_labels(scene, spec.width, spec.height);
            fs::write(dir.join(&seg), pnm::encode_pgm(spec.width, spec.height, &labels))?;
            Ok(ManifestEntry {
                image,
                seg,
                warning: scene.warning(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        root: dir.to_path_buf(),
        split: spec.split,
        seed: spec.seed,
        entries,
    };
    manifest.write()?;
    let info = DatasetInfo {
        spec: spec.clone(),
        scenes,
    };
    fs::write(
        dir.join(SIDECAR_FILE),
        serde_json::to_string(&info).map_err(|e| Error::Data(e.to_string()))?,
    )?;
    Ok(manifest)
}

/// Reads the manifest of a generated dataset directory.
pub fn read_dataset(dir: &Path) -> Result<Manifest> {
    let info = DatasetInfo::read(dir)?;
    Manifest::read(dir, info.spec.split, info.spec.seed)
}

/// Indices into `labels` after duplicating the minority class.
///
/// Each minority index is repeated `maj / min` times and the first
/// `maj % min` minority indices once more; the result keeps manifest order
/// (all copies of an entry are adjacent).
pub fn balance_indices(labels: &[u8]) -> Result<Vec<usize>> {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let zeros = labels.len() - ones;
    if ones == 0 || zeros == 0 {
        return Err(Error::Data(format!(
            "cannot balance: {zeros} non-warning and {ones} warning entries"
        )));
    }
    let (minority, maj, min) = if ones < zeros { (1, zeros, ones) } else { (0, ones, zeros) };
    let (reps, extra) = (maj / min, maj % min);
    let mut out = Vec::with_capacity(2 * maj);
    let mut seen = 0;
    for (i, &l) in labels.iter().enumerate() {
        if l == minority {
            let n = reps + usize::from(seen < extra);
            out.extend(std::iter::repeat_n(i, n));
            seen += 1;
        } else {
            out.push(i);
        }
    }
    Ok(out)
}

/// Duplicates minority-class entries until both classes have equal counts.
pub fn balance(manifest: &Manifest) -> Result<Manifest> {
    let idx = balance_indices(&manifest.labels())?;
    Ok(Manifest {
        entries: idx.into_iter().map(|i| manifest.entries[i].clone()).collect(),
        ..manifest.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `[3, height, width]` in `[0, 1]`.
    pub image: Tensor,
    /// Class id per pixel, row-major.
    pub seg_label: Vec<u8>,
    pub warning: u8,
}

impl Sample {
    /// Regression target: `class_id / (NUM_CLASSES - 1)` per pixel.
    pub fn seg_target(&self) -> Vec<f64> {
        self.seg_label.iter().map(|&c| seg_value(c)).collect()
    }
}

pub fn seg_value(class_id: u8) -> f64 {
    class_id as f64 / (NUM_CLASSES - 1) as f64
}

pub fn load_sample(manifest: &Manifest, entry: &ManifestEntry) -> Result<Sample> {
    let img_path = manifest.image_path(entry);
    let (w, h, rgb) = pnm::read_ppm(&img_path)?;
    let seg_path = manifest.seg_path(entry);
    let (sw, sh, seg_label) = pnm::read_pgm(&seg_path)?;
    if (sw, sh) != (w, h) {
        return Err(size_mismatch(seg_path, (sw, sh), (w, h)));
    }
    if let Some(pos) = seg_label.iter().position(|&c| c as usize >= NUM_CLASSES) {
        return Err(Error::Data(format!(
            "{}: pixel {pos} has class id {} outside 0..{NUM_CLASSES}",
            seg_path.display(),
            seg_label[pos]
        )));
    }
    Ok(Sample {
        image: pnm::rgb8_to_image(w, h, &rgb),
        seg_label,
        warning: entry.warning,
    })
}

fn size_mismatch(path: PathBuf, got: (usize, usize), want: (usize, usize)) -> Error {
    Error::Data(format!(
        "{}: segmentation map is {}x{}, image is {}x{}",
        path.display(),
        got.0,
        got.1,
        want.0,
        want.1
    ))
}

/// Loads every distinct entry of a manifest, in parallel.
pub fn load_all(manifest: &Manifest) -> Result<Vec<Sample>> {
    manifest
        .entries
        .par_iter()
        .map(|e| load_sample(manifest, e))
        .collect()
}
