//! Synthetic bags with a controllable witness rate.
//!
//! Negative instances are `N(0, I_D)`; witnesses are `N(sep·e₁, I_D)`. A
//! positive bag holds `max(1, Binomial(K, witness_rate))` witnesses, a
//! negative bag none.

use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::manifest::{write_manifest, ManifestRow, Split};
use super::{bagf, Bag, DataError};
use crate::diffcore::{rng_for, stream, Tensor};

pub const TRAIN_FRACTION: f64 = 0.65;
pub const VAL_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_bags: usize,
    pub pos_frac: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub d: usize,
    pub witness_rate: f64,
    /// Distance between the witness and background means, in standard deviations.
    pub sep: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_bags: 400,
            pos_frac: 0.5,
            k_min: 50,
            k_max: 200,
            d: 64,
            witness_rate: 0.1,
            sep: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidConfig(msg));
        if self.n_bags < 2 {
            return bad(format!("bags must be at least 2, got {}", self.n_bags));
        }
        if !(self.pos_frac > 0.0 && self.pos_frac < 1.0) {
            return bad(format!("pos_frac must lie in (0, 1), got {}", self.pos_frac));
        }
        if self.k_min < 1 || self.k_max < self.k_min {
            return bad(format!(
                "instance range must satisfy 1 <= k_min <= k_max, got [{}, {}]",
                self.k_min, self.k_max
            ));
        }
        if self.d == 0 {
            return bad("dim must be positive".into());
        }
        if !(self.witness_rate > 0.0 && self.witness_rate <= 1.0) {
            return bad(format!("witness rate must lie in (0, 1], got {}", self.witness_rate));
        }
        if !(self.sep >= 0.0 && self.sep.is_finite()) {
            return bad(format!("separation must be finite and non-negative, got {}", self.sep));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBag {
    pub bag_id: String,
    pub label: u8,
    pub split: Split,
    pub features: Tensor<f32>,
    pub witness: Vec<bool>,
}

impl SyntheticBag {
    pub fn to_bag(&self) -> Bag {
        Bag {
            bag_id: self.bag_id.clone(),
            label: self.label,
            features: self.features.clone(),
        }
    }
}

/// Split sizes `(train, val, test)` for `n` bags.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n as f64 * TRAIN_FRACTION).round() as usize;
    let val = ((n as f64 * VAL_FRACTION).round() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Generates the bags in memory.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<SyntheticBag>, DataError> {
    cfg.validate()?;
    let n = cfg.n_bags;
    let mut rng = rng_for(cfg.seed, stream::SYNTH);

    let n_pos = ((n as f64 * cfg.pos_frac).round() as usize).clamp(1, n - 1);
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut rng);

    let mut split_rng = rng_for(cfg.seed, stream::SPLIT);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut split_rng);
    let (n_train, n_val, _) = split_sizes(n);
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let width = n.to_string().len().max(4);
    let mut bags = Vec::with_capacity(n);
    for (i, (&label, &split)) in labels.iter().zip(&splits).enumerate() {
        let k = rng.random_range(cfg.k_min..=cfg.k_max);
        let mut witness = vec![false; k];
        if label == 1 {
            let drawn = Binomial::new(k as u64, cfg.witness_rate)
                .expect("rate validated")
                .sample(&mut rng) as usize;
            let count = drawn.clamp(1, k);
            for j in index::sample(&mut rng, k, count) {
                witness[j] = true;
            }
        }
        let mut data = Vec::with_capacity(k * cfg.d);
        for &w in &witness {
            for j in 0..cfg.d {
                let z: f64 = StandardNormal.sample(&mut rng);
                let shift = if w && j == 0 { cfg.sep } else { 0.0 };
                data.push((z + shift) as f32);
            }
        }
        debug_assert_eq!(label == 1, witness.iter().any(|&w| w));
        bags.push(SyntheticBag {
            bag_id: format!("bag_{i:0width$}"),
            label,
            split,
            features: Tensor::new(k, cfg.d, data).expect("k, d >= 1"),
            witness,
        });
    }
    Ok(bags)
}

#[derive(Debug, Serialize)]
struct GenMeta<'a> {
    format_version: u32,
    config: &'a SynthConfig,
    n_pos: usize,
    n_neg: usize,
    splits: SplitCounts,
}

#[derive(Debug, Serialize)]
struct SplitCounts {
    train: usize,
    val: usize,
    test: usize,
}

/// Writes a dataset directory: `bags/*.bagf`, `witness.csv`, `gen.meta.json`,
/// and `manifest.csv` last.
pub fn write_dataset(dir: &Path, cfg: &SynthConfig, bags: &[SyntheticBag]) -> Result<(), DataError> {
    let bag_dir = dir.join("bags");
    fs::create_dir_all(&bag_dir)?;
    let mut rel_paths = Vec::with_capacity(bags.len());
    for bag in bags {
        let rel = format!("bags/{}.bagf", bag.bag_id);
        bagf::write_bag(&dir.join(&rel), &bag.features)?;
        rel_paths.push(rel);
    }
    super::write_witness(&dir.join("witness.csv"), bags)?;

    let count = |s: Split| bags.iter().filter(|b| b.split == s).count();
    let n_pos = bags.iter().filter(|b| b.label == 1).count();
    let meta = GenMeta {
        format_version: 1,
        config: cfg,
        n_pos,
        n_neg: bags.len() - n_pos,
        splits: SplitCounts {
            train: count(Split::Train),
            val: count(Split::Val),
            test: count(Split::Test),
        },
    };
    fs::write(dir.join("gen.meta.json"), serde_json::to_string_pretty(&meta)?)?;

    let rows: Vec<ManifestRow<'_>> = bags
        .iter()
        .zip(&rel_paths)
        .map(|(b, p)| ManifestRow {
            bag_id: &b.bag_id,
            path: p,
            label: b.label,
            split: b.split,
        })
        .collect();
    write_manifest(&dir.join("manifest.csv"), &rows)?;
    Ok(())
}

/// Generates and writes a dataset in one go.
pub fn generate_synthetic(cfg: &SynthConfig, dir: &Path) -> Result<Vec<SyntheticBag>, DataError> {
    let bags = generate(cfg)?;
    write_dataset(dir, cfg, &bags)?;
    Ok(bags)
}
