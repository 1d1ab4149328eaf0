//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Split;
use crate::diffcore::AdamConfig;
use crate::dtfd::{FitConfig, Strategy};

pub const CONFIG_KEYS: [&str; 13] = [
    "data_dir",
    "out_dir",
    "M",
    "strategy",
    "epochs",
    "lr",
    "weight_decay",
    "D_att",
    "seed",
    "seeds",
    "split",
    "head_bias",
    "head_hidden",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    #[serde(rename = "M")]
    pub m: usize,
    pub strategy: Strategy,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    #[serde(rename = "D_att")]
    pub d_att: usize,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub split: Split,
    pub head_bias: bool,
    pub head_hidden: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            data_dir: None,
            out_dir: None,
            m: fit.m,
            strategy: fit.strategy,
            epochs: fit.epochs,
            lr: fit.tier1_adam.lr,
            weight_decay: fit.tier1_adam.weight_decay,
            d_att: fit.d_att,
            seed: fit.seed,
            seeds: Vec::new(),
            split: Split::Test,
            head_bias: fit.head_bias,
            head_hidden: None,
        }
    }
}

/// Values given explicitly on the command line or in a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub m: Option<usize>,
    pub strategy: Option<Strategy>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub d_att: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub split: Option<Split>,
    pub head_bias: Option<bool>,
    pub head_hidden: Option<usize>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<u64>().map_err(|e| format!("bad seed {x:?}: {e}")))
        .collect()
}

pub fn parse_seed_list(s: &str) -> Result<Vec<u64>, String> {
    let seeds = parse_seeds(s)?;
    if seeds.is_empty() {
        return Err("seed list is empty".into());
    }
    Ok(seeds)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("line {line}: invalid value {value:?} for {key}: {e}"))
}

impl Overrides {
    /// Parses a config file body. Unknown or repeated keys are errors.
    pub fn parse_file(text: &str) -> Result<Self, String> {
        let mut seen = BTreeMap::new();
        let mut o = Overrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| format!("line {line}: expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.contains(&key) {
                return Err(format!(
                    "line {line}: unknown key {key:?} (accepted: {})",
                    CONFIG_KEYS.join(", ")
                ));
            }
            if seen.insert(key.to_string(), line).is_some() {
                return Err(format!("line {line}: duplicate key {key:?}"));
            }
            match key {
                "data_dir" => o.data_dir = Some(PathBuf::from(value)),
                "out_dir" => o.out_dir = Some(PathBuf::from(value)),
                "M" => o.m = Some(parse_value(key, value, line)?),
                "strategy" => o.strategy = Some(parse_value(key, value, line)?),
                "epochs" => o.epochs = Some(parse_value(key, value, line)?),
                "lr" => o.lr = Some(parse_value(key, value, line)?),
                "weight_decay" => o.weight_decay = Some(parse_value(key, value, line)?),
                "D_att" => o.d_att = Some(parse_value(key, value, line)?),
                "seed" => o.seed = Some(parse_value(key, value, line)?),
                "seeds" => o.seeds = Some(parse_seed_list(value).map_err(|e| format!("line {line}: {e}"))?),
                "split" => o.split = Some(parse_value(key, value, line)?),
                "head_bias" => o.head_bias = Some(parse_value(key, value, line)?),
                "head_hidden" => {
                    let h: usize = parse_value(key, value, line)?;
                    o.head_hidden = (h > 0).then_some(h);
                }
                _ => unreachable!("key list checked above"),
            }
        }
        Ok(o)
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse_file(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Applies every value present in `self` on top of `base`.
    pub fn apply(&self, mut base: RunConfig) -> RunConfig {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    base.$field = v.clone();
                }
            };
        }
        if let Some(v) = &self.data_dir {
            base.data_dir = Some(v.clone());
        }
        if let Some(v) = &self.out_dir {
            base.out_dir = Some(v.clone());
        }
        take!(m);
        take!(strategy);
        take!(epochs);
        take!(lr);
        take!(weight_decay);
        take!(d_att);
        take!(seed);
        take!(seeds);
        take!(split);
        take!(head_bias);
        if self.head_hidden.is_some() {
            base.head_hidden = self.head_hidden;
        }
        base
    }
}

impl RunConfig {
    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            cfg = Overrides::from_path(path)?.apply(cfg);
        }
        let cfg = flags.apply(cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.m < 1 {
            return Err("M (--pseudo-bags) must be at least 1".into());
        }
        if self.epochs < 1 {
            return Err("epochs must be at least 1".into());
        }
        if self.d_att < 1 {
            return Err("D_att must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(format!("weight_decay must be finite and non-negative, got {}", self.weight_decay));
        }
        Ok(())
    }

    pub fn fit_config(&self) -> FitConfig {
        let adam = AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        };
        FitConfig {
            m: self.m,
            strategy: self.strategy,
            epochs: self.epochs,
            d_att: self.d_att,
            head_bias: self.head_bias,
            head_hidden: self.head_hidden,
            seed: self.seed,
            tier1_adam: adam,
            tier2_adam: adam,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file = Overrides::parse_file("# comment\nM = 8\nepochs = 20\nstrategy = maxmins\n").unwrap();
        let flags = Overrides {
            epochs: Some(3),
            ..Overrides::default()
        };
        let cfg = flags.apply(file.apply(RunConfig::default()));
        assert_eq!(cfg.m, 8);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.strategy, Strategy::MaxMinS);
        assert_eq!(cfg.lr, 1e-4);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = Overrides::parse_file("learning_rate = 0.1").unwrap_err();
        assert!(err.contains("unknown key \"learning_rate\""), "{err}");
    }

    #[test]
    fn bad_values_and_duplicates() {
        assert!(Overrides::parse_file("M = five").unwrap_err().contains("line 1"));
        assert!(Overrides::parse_file("seed = 1\nseed = 2").unwrap_err().contains("duplicate"));
        assert!(Overrides::parse_file("just text").is_err());
        assert!(Overrides::parse_file("strategy = best").is_err());
    }

    #[test]
    fn seeds_list() {
        let o = Overrides::parse_file("seeds = 1, 2,3").unwrap();
        assert_eq!(o.seeds, Some(vec![1, 2, 3]));
    }

    #[test]
    fn defaults() {
        let d = RunConfig::default();
        assert_eq!(d.m, 5);
        assert_eq!(d.strategy, Strategy::Afs);
        assert_eq!((d.lr, d.weight_decay), (1e-4, 1e-4));
        assert!(d.validate().is_ok());
    }
}
