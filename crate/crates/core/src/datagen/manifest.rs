use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_HEADER: &str = "image,seg,warning";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Image path relative to the manifest directory.
    pub image: String,
    pub seg: String,
    pub warning: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub split: Split,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.warning).collect()
    }

    pub fn count(&self, label: u8) -> usize {
        self.entries.iter().filter(|e| e.warning == label).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{MANIFEST_HEADER}\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{}", e.image, e.seg, e.warning);
        }
        s
    }

    pub fn write(&self) -> Result<()> {
        fs::write(self.root.join(MANIFEST_FILE), self.to_csv())?;
        Ok(())
    }

    /// Parses `manifest.csv` from `root`; split and seed come from the caller.
    pub fn read(root: &Path, split: Split, seed: u64) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)?;
        let entries = parse_csv(&text, &path)?;
        Ok(Self {
            root: root.to_path_buf(),
            split,
            seed,
            entries,
        })
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.image)
    }

    pub fn seg_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.seg)
    }
}

fn parse_csv(text: &str, path: &Path) -> Result<Vec<ManifestEntry>> {
    let err = |offset: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        offset,
        msg,
    };
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n');
    match lines.next() {
        Some(h) if h.trim_end() == MANIFEST_HEADER => offset += h.len(),
        _ => return Err(err(0, format!("expected header `{MANIFEST_HEADER}`"))),
    }
    let mut entries = Vec::new();
    for line in lines {
        let row = line.trim_end();
        if !row.is_empty() {
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != 3 {
                return Err(err(offset, format!("expected 3 fields, got {}", fields.len())));
            }
            let warning = match fields[2] {
                "0" => 0,
                "1" => 1,
                other => return Err(err(offset, format!("warning label `{other}` is not 0 or 1"))),
            };
            entries.push(ManifestEntry {
                image: fields[0].to_string(),
                seg: fields[1].to_string(),
                warning,
            });
        }
        offset += line.len();
    }
    Ok(entries)
}
