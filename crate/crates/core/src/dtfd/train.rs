use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distill::{distill, DistilledFeature, Strategy};
use super::partition::{effective_m, eval_partition, split_pseudobags, PseudoBagPartition};
use super::{DtfdError, DtfdModel};
use crate::abmil::{build_forward, forward_bag, forward_subset, AbmilForward, AbmilParams, ParamVars};
use crate::attribution::attribute_forward;
use crate::data::Bag;
use crate::diffcore::{adam_step, bce_value, rng_for, stream, AdamConfig, AdamState, Graph, Real, Rng, Tensor, Var};
use crate::metrics::auc;

type Result<T, E = DtfdError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Pseudo-bags per slide.
    pub m: usize,
    pub strategy: Strategy,
    pub epochs: usize,
    pub d_att: usize,
    pub head_bias: bool,
    /// Optional hidden ReLU layer in both classifier heads.
    pub head_hidden: Option<usize>,
    pub seed: u64,
    pub tier1_adam: AdamConfig,
    pub tier2_adam: AdamConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            m: 5,
            strategy: Strategy::Afs,
            epochs: 100,
            d_att: 128,
            head_bias: true,
            head_hidden: None,
            seed: 0,
            tier1_adam: AdamConfig::default(),
            tier2_adam: AdamConfig::default(),
        }
    }
}

/// Optimizer moments and the training random stream.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub opt1: AdamState<f32>,
    pub opt2: AdamState<f32>,
    pub rng: Rng,
}

impl TrainState {
    pub fn new(seed: u64) -> Self {
        Self {
            opt1: AdamState::new(),
            opt2: AdamState::new(),
            rng: rng_for(seed, stream::TRAIN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub val_auc_t1: f64,
    pub val_auc_t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub config: FitConfig,
}

impl TrainHistory {
    /// Highest Tier-2 validation AUC; the earliest epoch wins ties.
    pub fn select_best(epochs: &[EpochRecord]) -> Option<usize> {
        let mut best: Option<&EpochRecord> = None;
        for rec in epochs {
            if best.is_none_or(|b| rec.val_auc_t2 > b.val_auc_t2) {
                best = Some(rec);
            }
        }
        best.map(|r| r.epoch)
    }
}

/// Mean clamped cross entropy of pseudo-bag probabilities against the parent label.
pub fn tier1_loss(probs: &[f64], label: u8) -> f64 {
    let y = f64::from(label);
    probs.iter().map(|&p| bce_value(p, y)).sum::<f64>() / probs.len() as f64
}

/// Tier-1 loss of one slide built on a single graph with shared parameters.
pub fn tier1_loss_on_graph<T: Real>(
    g: &mut Graph<T>,
    h: &Tensor<T>,
    groups: &[Vec<usize>],
    pv: ParamVars,
    label: u8,
) -> Result<Var> {
    let mut total: Option<Var> = None;
    for group in groups {
        let hv = g.constant(h.select_rows(group)?);
        let fv = build_forward(g, hv, pv)?;
        let p1 = g.select(fv.p, 0, 1)?;
        let loss = g.bce(p1, f64::from(label))?;
        total = Some(match total {
            Some(t) => g.add(t, loss)?,
            None => loss,
        });
    }
    let total = total.ok_or(DtfdError::Config("no pseudo-bags".into()))?;
    Ok(g.scale(total, T::of(1.0 / groups.len() as f64)))
}

fn stack_features<T: Real>(features: &[DistilledFeature<T>], width: usize) -> Result<Tensor<T>> {
    for f in features {
        if f.vector.len() != width {
            return Err(DtfdError::DistilledDim {
                expected: width,
                actual: f.vector.len(),
            });
        }
    }
    let rows: Vec<&[T]> = features.iter().map(|f| f.vector.as_slice()).collect();
    Ok(Tensor::stack_rows(&rows)?)
}

/// Tier-2 pass over the distilled features of one slide (read `positive_prob()` for ŷ).
pub fn tier2_forward<T: Real>(features: &[DistilledFeature<T>], params: &AbmilParams<T>) -> Result<AbmilForward<T>> {
    let input = stack_features(features, params.dims.d)?;
    Ok(forward_bag(&input, params, false)?)
}

struct PseudoBagPass {
    loss: f64,
    grads: Vec<Tensor<f32>>,
    feature: DistilledFeature<f32>,
}

fn trainable_grads(g: &Graph<f32>, vars: &[Var]) -> Vec<Tensor<f32>> {
    vars.iter()
        .map(|&v| {
            g.grad(v).cloned().unwrap_or_else(|| {
                let (r, c) = g.value(v).shape();
                Tensor::zeros(r, c)
            })
        })
        .collect()
}

fn tier1_pass(
    h: &Tensor<f32>,
    group: &[usize],
    params: &AbmilParams<f32>,
    label: u8,
    strategy: Strategy,
    m: usize,
) -> Result<PseudoBagPass> {
    let mut fwd = forward_subset(h, group, params, true)?;
    let attr = attribute_forward(&fwd)?;
    let feature = distill(&fwd, &attr, strategy);
    let vars = fwd.vars;
    let g = fwd.graph_mut()?;
    let p1 = g.select(vars.p, 0, 1)?;
    let loss = g.bce(p1, f64::from(label))?;
    let scaled = g.scale(loss, 1.0 / m as f32);
    g.backward(scaled)?;
    Ok(PseudoBagPass {
        loss: f64::from(g.value(loss).item()),
        grads: trainable_grads(g, &vars.params.trainable()),
        feature,
    })
}

fn sum_grads(passes: &[PseudoBagPass]) -> Vec<Tensor<f32>> {
    let mut total = passes[0].grads.clone();
    for p in &passes[1..] {
        for (t, g) in total.iter_mut().zip(&p.grads) {
            t.add_assign(g);
        }
    }
    total
}

/// One slide: a fresh random partition, a Tier-1 update from the mean
/// pseudo-bag loss, then a Tier-2 update on the detached distilled features.
/// Returns `(L1, L2)` for the slide.
pub fn train_step(bag: &Bag, model: &mut DtfdModel, state: &mut TrainState, cfg: &FitConfig) -> Result<(f64, f64)> {
    let h = &bag.features;
    let m = effective_m(h.rows(), model.m, &bag.bag_id);
    let partition = split_pseudobags(h.rows(), m, &mut state.rng)?;

    let tier1 = &model.tier1;
    let passes = partition
        .groups
        .par_iter()
        .map(|group| tier1_pass(h, group, tier1, bag.label, model.strategy, m))
        .collect::<Result<Vec<_>>>()?;
    let l1 = passes.iter().map(|p| p.loss).sum::<f64>() / m as f64;

    let grads1 = sum_grads(&passes);
    let grad_refs: Vec<&Tensor<f32>> = grads1.iter().collect();
    adam_step(&mut model.tier1.trainable_mut(), &grad_refs, &mut state.opt1, &cfg.tier1_adam)?;

    let features: Vec<DistilledFeature<f32>> = passes.into_iter().map(|p| p.feature).collect();
    let input = stack_features(&features, model.tier2.dims.d)?;
    let mut fwd = forward_bag(&input, &model.tier2, true)?;
    let vars = fwd.vars;
    let g = fwd.graph_mut()?;
    let p1 = g.select(vars.p, 0, 1)?;
    let loss = g.bce(p1, f64::from(bag.label))?;
    g.backward(loss)?;
    let l2 = f64::from(g.value(loss).item());
    let grads2 = trainable_grads(g, &vars.params.trainable());
    let grad_refs: Vec<&Tensor<f32>> = grads2.iter().collect();
    adam_step(&mut model.tier2.trainable_mut(), &grad_refs, &mut state.opt2, &cfg.tier2_adam)?;

    Ok((l1, l2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    /// Tier-2 positive probability ŷ.
    pub y_tier2: f64,
    /// Tier-1 positive probability of each pseudo-bag.
    pub pseudo_probs: Vec<f64>,
    /// Max over the pseudo-bag probabilities.
    pub tier1_pooled: f64,
    pub partition: PseudoBagPartition,
}

/// Scores a slide with its fixed, bag-id-seeded partition.
pub fn infer(bag: &Bag, model: &DtfdModel) -> Result<Inference> {
    let partition = eval_partition(&bag.bag_id, bag.features.rows(), model.m)?;
    infer_with_partition(bag, model, partition)
}

pub fn infer_with_partition(bag: &Bag, model: &DtfdModel, partition: PseudoBagPartition) -> Result<Inference> {
    let mut features = Vec::with_capacity(partition.m());
    let mut pseudo_probs = Vec::with_capacity(partition.m());
    for group in &partition.groups {
        let fwd = forward_subset(&bag.features, group, &model.tier1, false)?;
        let attr = attribute_forward(&fwd)?;
        features.push(distill(&fwd, &attr, model.strategy));
        pseudo_probs.push(f64::from(fwd.positive_prob()));
    }
    let y_tier2 = f64::from(tier2_forward(&features, &model.tier2)?.positive_prob());
    let tier1_pooled = pseudo_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Inference {
        y_tier2,
        pseudo_probs,
        tier1_pooled,
        partition,
    })
}

/// Scores many slides in parallel; output order follows `bags`.
pub fn infer_all(bags: &[Bag], model: &DtfdModel) -> Result<Vec<Inference>> {
    bags.par_iter().map(|b| infer(b, model)).collect()
}

/// Tier-1 pooled and Tier-2 AUC over a set of slides.
pub fn evaluate_auc(bags: &[Bag], model: &DtfdModel) -> Result<(f64, f64)> {
    let inf = infer_all(bags, model)?;
    let labels: Vec<u8> = bags.iter().map(|b| b.label).collect();
    let t1: Vec<f64> = inf.iter().map(|i| i.tier1_pooled).collect();
    let t2: Vec<f64> = inf.iter().map(|i| i.y_tier2).collect();
    Ok((auc(&t1, &labels)?, auc(&t2, &labels)?))
}

/// Trains for `cfg.epochs` epochs and returns the parameters of the epoch with
/// the best Tier-2 validation AUC.
pub fn fit(train: &[Bag], val: &[Bag], cfg: &FitConfig) -> Result<(DtfdModel, TrainHistory)> {
    if train.is_empty() {
        return Err(DtfdError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(DtfdError::EmptySplit("val"));
    }
    if cfg.epochs == 0 {
        return Err(DtfdError::Config("epochs must be at least 1".into()));
    }
    let d = train[0].features.cols();
    if let Some(bad) = train.iter().chain(val).find(|b| b.features.cols() != d) {
        return Err(DtfdError::Config(format!(
            "bag {} has feature width {}, expected {d}",
            bad.bag_id,
            bad.features.cols()
        )));
    }

    let mut model = DtfdModel::init(d, cfg)?;
    let mut state = TrainState::new(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, DtfdModel)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut state.rng);
        let (mut l1_sum, mut l2_sum) = (0.0, 0.0);
        for &i in &order {
            let (l1, l2) = train_step(&train[i], &mut model, &mut state, cfg)?;
            if !(l1.is_finite() && l2.is_finite()) {
                return Err(DtfdError::NonFiniteLoss { epoch });
            }
            l1_sum += l1;
            l2_sum += l2;
        }
        let (val_auc_t1, val_auc_t2) = evaluate_auc(val, &model)?;
        let rec = EpochRecord {
            epoch,
            l1: l1_sum / train.len() as f64,
            l2: l2_sum / train.len() as f64,
            val_auc_t1,
            val_auc_t2,
        };
        info!(
            "epoch {epoch}: L1 {:.4} L2 {:.4} val AUC tier1 {:.4} tier2 {:.4}",
            rec.l1, rec.l2, val_auc_t1, val_auc_t2
        );
        if best.as_ref().is_none_or(|(b, _)| val_auc_t2 > *b) {
            best = Some((val_auc_t2, model.clone()));
        }
        records.push(rec);
    }

    let best_epoch = TrainHistory::select_best(&records).expect("at least one epoch");
    let (_, best_model) = best.expect("at least one epoch");
    Ok((
        best_model,
        TrainHistory {
            epochs: records,
            best_epoch,
            config: cfg.clone(),
        },
    ))
}
