//! Bag data: the `.bagf` feature format, CSV manifests, witness masks and the
//! synthetic generator.

pub mod bagf;
pub mod manifest;
pub mod synth;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bagf::{read_bag, write_bag, FormatError};
pub use manifest::{load_manifest, BagRecord, ManifestError, Split};
pub use synth::{generate, generate_synthetic, SynthConfig, SyntheticBag};

use crate::diffcore::Tensor;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("{bag_id}: {source}")]
    Bag {
        bag_id: String,
        #[source]
        source: FormatError,
    },
    #[error("witness file: {0}")]
    Witness(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A bag with its features in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub bag_id: String,
    pub label: u8,
    pub features: Tensor<f32>,
}

/// Loads every bag of one split, in manifest order.
pub fn load_split(records: &[BagRecord], split: Split) -> Result<Vec<Bag>, DataError> {
    records
        .iter()
        .filter(|r| r.split == split)
        .map(|r| {
            let features = r.load().map_err(|source| DataError::Bag {
                bag_id: r.bag_id.clone(),
                source,
            })?;
            Ok(Bag {
                bag_id: r.bag_id.clone(),
                label: r.label,
                features,
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct WitnessRow {
    bag_id: String,
    instance_index: usize,
    is_witness: u8,
}

pub fn write_witness(path: &Path, bags: &[SyntheticBag]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    for bag in bags {
        for (i, &wit) in bag.witness.iter().enumerate() {
            w.serialize(WitnessRow {
                bag_id: bag.bag_id.clone(),
                instance_index: i,
                is_witness: u8::from(wit),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Witness masks by bag id. Rows of a bag must list instances `0..K` in order.
pub fn read_witness(path: &Path) -> Result<HashMap<String, Vec<bool>>, DataError> {
    let mut out: HashMap<String, Vec<bool>> = HashMap::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let row: WitnessRow = row?;
        let mask = out.entry(row.bag_id.clone()).or_default();
        if row.instance_index != mask.len() || row.is_witness > 1 {
            return Err(DataError::Witness(format!(
                "bag {} row for instance {} is out of order or malformed",
                row.bag_id, row.instance_index
            )));
        }
        mask.push(row.is_witness == 1);
    }
    Ok(out)
}
