use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::json;

use super::config::RunConfig;
use super::{AttributeArgs, CliError, EvalArgs, GenDataArgs, Tiers, TrainArgs};
use crate::attribution::{attribute_bag, write_attribution_rows};
use crate::data::{generate_synthetic, load_manifest, load_split, read_witness, BagRecord, DataError, Split, SynthConfig};
use crate::dtfd::{fit, infer_all, load_model, save_model, DtfdModel};
use crate::metrics::{auc, EvalReport, MetricError};

type Result<T, E = CliError> = std::result::Result<T, E>;

const RESOLVED_CONFIG: &str = "config.resolved.json";
const GENERATED: [&str; 4] = ["manifest.csv", "witness.csv", "gen.meta.json", RESOLVED_CONFIG];

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn is_nonempty_dir(dir: &Path) -> io::Result<bool> {
    Ok(fs::read_dir(dir)?.next().is_some())
}

/// Generates a synthetic dataset. Every argument is validated before anything is written.
pub fn cmd_gen_data(args: &GenDataArgs) -> Result<String> {
    let cfg = SynthConfig {
        n_bags: args.bags,
        pos_frac: args.pos_frac,
        k_min: args.k_min,
        k_max: args.k_max,
        d: args.dim,
        witness_rate: args.witness_rate,
        sep: args.sep,
        seed: args.seed,
    };
    cfg.validate()?;
    let out = &args.out;
    if out.exists() {
        if !out.is_dir() {
            return Err(CliError::usage(format!("{} exists and is not a directory", out.display())));
        }
        if is_nonempty_dir(out)? {
            if !args.force {
                return Err(CliError::usage(format!(
                    "{} is not empty; pass --force to overwrite",
                    out.display()
                )));
            }
            let bags = out.join("bags");
            if bags.is_dir() {
                fs::remove_dir_all(&bags)?;
            }
            for name in GENERATED {
                let p = out.join(name);
                if p.is_file() {
                    fs::remove_file(p)?;
                }
            }
        }
    }
    fs::create_dir_all(out)?;
    let bags = generate_synthetic(&cfg, out)?;
    write_json(&out.join(RESOLVED_CONFIG), &cfg)?;
    let count = |s: Split| bags.iter().filter(|b| b.split == s).count();
    Ok(format!(
        "wrote {} bags (train {}, val {}, test {}) to {}",
        bags.len(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test),
        out.display()
    ))
}

/// `dir/manifest.csv` for a directory, the path itself otherwise.
pub fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join("manifest.csv")
    } else {
        data.to_path_buf()
    }
}

fn load_records(data: &Path) -> Result<Vec<BagRecord>> {
    let path = manifest_path(data);
    if !path.is_file() {
        return Err(CliError::usage(format!("manifest not found: {}", path.display())));
    }
    Ok(load_manifest(&path)?)
}

fn require_split(records: &[BagRecord], split: Split) -> Result<Vec<crate::data::Bag>> {
    let bags = load_split(records, split)?;
    if bags.is_empty() {
        return Err(CliError::usage(format!("the manifest has no {split} bags")));
    }
    Ok(bags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub epochs: usize,
    pub val_auc_t1: f64,
    pub val_auc_t2: f64,
    pub out_dir: PathBuf,
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "best epoch {}/{}: val AUC tier2 {:.4}, tier1 pooled {:.4}; model written to {}",
            self.best_epoch,
            self.epochs,
            self.val_auc_t2,
            self.val_auc_t1,
            self.out_dir.display()
        )
    }
}

fn resolve_train(args: &TrainArgs) -> Result<(RunConfig, PathBuf, PathBuf)> {
    let cfg = RunConfig::resolve(args.config.as_deref(), &args.overrides()).map_err(CliError::usage)?;
    let data = cfg
        .data_dir
        .clone()
        .ok_or_else(|| CliError::usage("no data directory: pass --data or set data_dir"))?;
    let out = cfg
        .out_dir
        .clone()
        .ok_or_else(|| CliError::usage("no output directory: pass --out or set out_dir"))?;
    Ok((cfg, data, out))
}

/// Trains on the train split, selects the epoch by validation AUC and writes the model directory.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let (cfg, data, out) = resolve_train(args)?;
    let records = load_records(&data)?;
    let train = require_split(&records, Split::Train)?;
    let val = require_split(&records, Split::Val)?;
    info!("training on {} bags, validating on {}", train.len(), val.len());

    let (model, history) = fit(&train, &val, &cfg.fit_config())?;
    save_model(&out, &model, &history)?;
    write_json(&out.join(RESOLVED_CONFIG), &cfg)?;
    let best = history.epochs[history.best_epoch - 1];
    Ok(TrainSummary {
        best_epoch: history.best_epoch,
        epochs: history.epochs.len(),
        val_auc_t1: best.val_auc_t1,
        val_auc_t2: best.val_auc_t2,
        out_dir: out,
    })
}

/// The configuration a model directory was trained with, or defaults if absent.
fn model_config(model_dir: &Path) -> Result<RunConfig> {
    let path = model_dir.join(RESOLVED_CONFIG);
    if !path.is_file() {
        return Ok(RunConfig::default());
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn load_trained(model_dir: &Path) -> Result<DtfdModel> {
    if !model_dir.join("model.meta.json").is_file() {
        return Err(CliError::usage(format!("{} is not a model directory", model_dir.display())));
    }
    let (model, _) = load_model(model_dir)?;
    Ok(model)
}

fn data_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.data_dir.clone())
        .ok_or_else(|| CliError::usage("no data directory: pass --data"))
}

struct TierScores {
    tier1: Vec<f64>,
    tier2: Vec<f64>,
}

fn score(bags: &[crate::data::Bag], model: &DtfdModel) -> Result<TierScores> {
    let inf = infer_all(bags, model)?;
    Ok(TierScores {
        tier1: inf.iter().map(|i| i.tier1_pooled).collect(),
        tier2: inf.iter().map(|i| i.y_tier2).collect(),
    })
}

fn tier_json(tiers: Tiers, t1: EvalReport, t2: EvalReport) -> serde_json::Value {
    match tiers {
        Tiers::Tier1 => json!(t1),
        Tiers::Tier2 => json!(t2),
        Tiers::Both => json!({ "tier1": t1, "tier2": t2 }),
    }
}

/// Evaluates a model on one split and returns the JSON report.
///
/// With seeds, the model's resolved configuration is retrained once per seed
/// and the report holds means with 95% half-widths.
pub fn cmd_eval(args: &EvalArgs) -> Result<String> {
    let model = load_trained(&args.model)?;
    let cfg = model_config(&args.model)?;
    let data = data_dir(&args.data, &cfg)?;
    let split = args.split.unwrap_or(cfg.split);
    let seeds = args.seeds.clone().unwrap_or_else(|| cfg.seeds.clone());
    if seeds.len() == 1 {
        return Err(CliError::usage("--seeds needs at least 2 seeds for a confidence interval"));
    }

    let records = load_records(&data)?;
    let bags = require_split(&records, split)?;
    let labels: Vec<u8> = bags.iter().map(|b| b.label).collect();
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(MetricError::SingleClass {
            n_pos,
            n_neg: labels.len() - n_pos,
        }
        .into());
    }

    let value = if seeds.is_empty() {
        let s = score(&bags, &model)?;
        tier_json(
            args.tiers,
            EvalReport::evaluate(&s.tier1, &labels)?,
            EvalReport::evaluate(&s.tier2, &labels)?,
        )
    } else {
        let train = require_split(&records, Split::Train)?;
        let val = require_split(&records, Split::Val)?;
        let (mut r1, mut r2) = (Vec::new(), Vec::new());
        for &seed in &seeds {
            info!("retraining with seed {seed}");
            let fit_cfg = RunConfig { seed, ..cfg.clone() }.fit_config();
            let (m, _) = fit(&train, &val, &fit_cfg)?;
            let s = score(&bags, &m)?;
            r1.push(EvalReport::evaluate(&s.tier1, &labels)?);
            r2.push(EvalReport::evaluate(&s.tier2, &labels)?);
        }
        tier_json(
            args.tiers,
            EvalReport::aggregate(r1, seeds.clone())?,
            EvalReport::aggregate(r2, seeds)?,
        )
    };
    let text = serde_json::to_string_pretty(&value)?;
    if let Some(out) = &args.out {
        write_json(out, &value)?;
    }
    Ok(text)
}

fn select_records<'a>(records: &'a [BagRecord], ids: &[String], split: Split) -> Result<Vec<&'a BagRecord>> {
    if ids.is_empty() {
        let chosen: Vec<_> = records.iter().filter(|r| r.split == split).collect();
        if chosen.is_empty() {
            return Err(CliError::usage(format!("the manifest has no {split} bags")));
        }
        return Ok(chosen);
    }
    ids.iter()
        .map(|id| {
            records
                .iter()
                .find(|r| &r.bag_id == id)
                .ok_or_else(|| CliError::usage(format!("unknown bag id {id:?}")))
        })
        .collect()
}

/// Writes per-instance attribution rows. Returns a summary of instance-level
/// AUCs when the dataset carries witness labels, otherwise an empty string.
pub fn cmd_attribute(args: &AttributeArgs) -> Result<String> {
    let model = load_trained(&args.model)?;
    let cfg = model_config(&args.model)?;
    let data = data_dir(&args.data, &cfg)?;
    let manifest = manifest_path(&data);
    let records = load_records(&data)?;
    let chosen = select_records(&records, &args.bags, args.split)?;

    let witness_path = manifest.parent().unwrap_or(Path::new(".")).join("witness.csv");
    let witness = if witness_path.is_file() {
        Some(read_witness(&witness_path)?)
    } else {
        None
    };

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| CliError::io(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    let (mut auc_p, mut auc_a) = (Vec::new(), Vec::new());
    for rec in chosen {
        let features = rec.load().map_err(|source| DataError::Bag {
            bag_id: rec.bag_id.clone(),
            source,
        })?;
        let attr = attribute_bag(&features, &model.tier1)
            .map_err(|e| CliError::usage(format!("{}: {e}", rec.bag_id)))?;
        write_attribution_rows(&mut writer, &rec.bag_id, &attr)?;

        let Some(mask) = witness.as_ref().and_then(|w| w.get(&rec.bag_id)) else {
            continue;
        };
        if mask.len() != attr.k() {
            return Err(CliError::usage(format!(
                "witness mask of {} has {} entries for {} instances",
                rec.bag_id,
                mask.len(),
                attr.k()
            )));
        }
        let truth: Vec<u8> = mask.iter().map(|&w| u8::from(w)).collect();
        let p: Vec<f64> = attr.positive_probs().iter().map(|&x| f64::from(x)).collect();
        let a: Vec<f64> = attr.a_norm.iter().map(|&x| f64::from(x)).collect();
        // Bags without both witness and background instances have no instance AUC.
        if let (Ok(x), Ok(y)) = (auc(&p, &truth), auc(&a, &truth)) {
            auc_p.push(x);
            auc_a.push(y);
        }
    }
    writer.flush()?;

    if auc_p.is_empty() {
        return Ok(String::new());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(format!(
        "instance AUC over {} bags with witnesses: derived probability {:.4}, normalized attention {:.4}",
        auc_p.len(),
        mean(&auc_p),
        mean(&auc_a)
    ))
}
