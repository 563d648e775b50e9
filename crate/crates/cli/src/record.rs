//! Per-command run records: config hash, seed and output digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const RECORD_FILE: &str = "run.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a training log with the wall-clock column removed, so it only
/// depends on the computation.
pub fn log_digest(csv: &str) -> String {
    let stripped: String = csv
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .flat_map(|l| [l, "\n"])
        .collect();
    sha256_hex(stripped.as_bytes())
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if path.file_name().is_some_and(|n| n == "log.csv") {
        Ok(log_digest(&String::from_utf8_lossy(&bytes)))
    } else {
        Ok(sha256_hex(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Digests of consumed files, keyed by path relative to the output root.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunRecord {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn key(root: &Path, path: &Path) -> String {
        path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }

    pub fn input(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.inputs.insert(Self::key(root, path), file_digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.outputs.insert(Self::key(root, path), file_digest(path)?);
        Ok(())
    }

    /// Records every regular file directly inside `dir` as an output.
    pub fn output_dir(&mut self, root: &Path, dir: &Path) -> Result<()> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.sort();
        for f in files.iter().filter(|f| f.is_file() && !f.ends_with(RECORD_FILE)) {
            self.output(root, f)?;
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(RECORD_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(RECORD_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    }
}
