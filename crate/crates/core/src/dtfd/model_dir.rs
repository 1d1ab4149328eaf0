//! Model directory layout: `tier1.json`, `tier2.json`, `model.meta.json`, `history.csv`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{EpochRecord, TrainHistory};
use super::{DtfdError, DtfdModel, Strategy};
use crate::abmil::AbmilParams;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaDims {
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "D_att")]
    pub d_att: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub tier2_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub strategy: Strategy,
    pub dims: MetaDims,
    pub seed: u64,
    pub best_epoch: usize,
}

pub fn write_history(path: &Path, epochs: &[EpochRecord]) -> Result<(), DtfdError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["epoch", "L1", "L2", "val_auc_t1", "val_auc_t2"])?;
    for r in epochs {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_model(dir: &Path, model: &DtfdModel, history: &TrainHistory) -> Result<(), DtfdError> {
    fs::create_dir_all(dir)?;
    model.tier1.save(&dir.join("tier1.json"))?;
    model.tier2.save(&dir.join("tier2.json"))?;
    let meta = ModelMeta {
        format_version: MODEL_FORMAT_VERSION,
        m: model.m,
        strategy: model.strategy,
        dims: MetaDims {
            d: model.tier1.dims.d,
            d_att: model.tier1.dims.d_att,
            c: model.tier1.dims.c,
            tier2_in: model.tier2.dims.d,
        },
        seed: history.config.seed,
        best_epoch: history.best_epoch,
    };
    fs::write(dir.join("model.meta.json"), serde_json::to_string_pretty(&meta)?)?;
    write_history(&dir.join("history.csv"), &history.epochs)?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<(DtfdModel, ModelMeta), DtfdError> {
    let meta: ModelMeta = serde_json::from_str(&fs::read_to_string(dir.join("model.meta.json"))?)?;
    if meta.format_version != MODEL_FORMAT_VERSION {
        return Err(DtfdError::Config(format!(
            "unsupported model format_version {}",
            meta.format_version
        )));
    }
    let model = DtfdModel {
        tier1: AbmilParams::load(&dir.join("tier1.json"))?,
        tier2: AbmilParams::load(&dir.join("tier2.json"))?,
        m: meta.m,
        strategy: meta.strategy,
    };
    model.validate()?;
    if model.tier1.dims.d != meta.dims.d || model.tier2.dims.d != meta.dims.tier2_in {
        return Err(DtfdError::Config("model.meta.json dims disagree with the parameter files".into()));
    }
    Ok((model, meta))
}
