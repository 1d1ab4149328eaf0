use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bagf::{self, FormatError};
use crate::diffcore::Tensor;

pub const MANIFEST_HEADER: [&str; 4] = ["bag_id", "path", "label", "split"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest header must be exactly \"bag_id,path,label,split\", found {0:?}")]
    Header(String),
    #[error("row {row}: expected 4 fields, found {found}")]
    Columns { row: usize, found: usize },
    #[error("row {row}: label must be 0 or 1, found {value:?}")]
    Label { row: usize, value: String },
    #[error("row {row}: split must be train, val or test, found {value:?}")]
    Split { row: usize, value: String },
    #[error("row {row}: feature file {path} does not exist")]
    MissingFile { row: usize, path: PathBuf },
    #[error("duplicate bag_id {0:?}")]
    Duplicate(String),
    #[error("row {row}: empty bag_id")]
    EmptyId { row: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One manifest row. Features stay on disk until [`BagRecord::load`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagRecord {
    pub bag_id: String,
    /// Resolved path (relative entries are taken relative to the manifest).
    pub path: PathBuf,
    pub label: u8,
    pub split: Split,
}

impl BagRecord {
    pub fn load(&self) -> Result<Tensor<f32>, FormatError> {
        bagf::read_bag(&self.path)
    }
}

/// Rows are numbered from 1, not counting the header.
pub fn load_manifest(path: &Path) -> Result<Vec<BagRecord>, ManifestError> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(File::open(path)?);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(ManifestError::Header(String::new())),
    };
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(ManifestError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rows.enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != 4 {
            return Err(ManifestError::Columns { row, found: rec.len() });
        }
        let bag_id = rec[0].to_string();
        if bag_id.is_empty() {
            return Err(ManifestError::EmptyId { row });
        }
        let label = match &rec[2] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(ManifestError::Label {
                    row,
                    value: other.to_string(),
                })
            }
        };
        let split = rec[3].parse::<Split>().map_err(|_| ManifestError::Split {
            row,
            value: rec[3].to_string(),
        })?;
        let raw = Path::new(&rec[1]);
        let path = if raw.is_absolute() { raw.to_path_buf() } else { base.join(raw) };
        if !path.is_file() {
            return Err(ManifestError::MissingFile { row, path });
        }
        if !seen.insert(bag_id.clone()) {
            return Err(ManifestError::Duplicate(bag_id));
        }
        out.push(BagRecord {
            bag_id,
            path,
            label,
            split,
        });
    }
    Ok(out)
}

/// Manifest row as written to disk.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestRow<'a> {
    pub bag_id: &'a str,
    pub path: &'a str,
    pub label: u8,
    pub split: Split,
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow<'_>]) -> Result<(), ManifestError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(MANIFEST_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
