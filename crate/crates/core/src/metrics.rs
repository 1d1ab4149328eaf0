//! Slide-level evaluation: AUC, accuracy and F1 at a fixed threshold, and
//! normal-approximation 95% intervals across repeated runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("AUC is undefined without both classes (positives: {n_pos}, negatives: {n_neg})")]
    SingleClass { n_pos: usize, n_neg: usize },
    #[error("no scores to evaluate")]
    Empty,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("labels must be 0 or 1, got {0}")]
    Label(u8),
    #[error("a confidence interval needs at least 2 values, got {0}")]
    TooFewValues(usize),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(MetricError::Label(bad));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    Ok((n_pos, labels.len() - n_pos))
}

/// Mann-Whitney estimate of the ROC AUC: the fraction of (positive, negative)
/// pairs ranked correctly, with ties credited one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = check(scores, labels)?;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass { n_pos, n_neg });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));

    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_run = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += avg_rank * pos_in_run as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccF1 {
    pub acc: f64,
    pub f1: f64,
    /// Set when F1 is formally undefined (no positive labels and no positive
    /// predictions); `f1` is then reported as 1.0.
    pub f1_degenerate: bool,
}

/// Accuracy and F1 with predictions `score >= threshold`.
pub fn acc_f1(scores: &[f64], labels: &[u8], threshold: f64) -> Result<AccF1> {
    check(scores, labels)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let acc = (tp + tn) as f64 / scores.len() as f64;
    let denom = tp as f64 + (fp + fn_) as f64 / 2.0;
    let (f1, f1_degenerate) = if tp + fp + fn_ == 0 {
        (1.0, true)
    } else {
        (tp as f64 / denom, false)
    };
    Ok(AccF1 { acc, f1, f1_degenerate })
}

/// Mean and half-width `1.96 · sd / sqrt(n)`, with the sample (n-1) standard deviation.
pub fn ci95(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(MetricError::TooFewValues(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, 1.96 * var.sqrt() / (n as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ci95 {
    pub auc: f64,
    pub acc: f64,
    pub f1: f64,
    /// Always "normal": mean ± 1.96·sd/√n.
    pub method: CiMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub acc: f64,
    pub f1: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub f1_degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci95: Option<Ci95>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_seed: Option<Vec<EvalReport>>,
}

impl EvalReport {
    pub fn evaluate(scores: &[f64], labels: &[u8]) -> Result<Self> {
        let (n_pos, n_neg) = check(scores, labels)?;
        let auc = auc(scores, labels)?;
        let AccF1 { acc, f1, f1_degenerate } = acc_f1(scores, labels, DEFAULT_THRESHOLD)?;
        Ok(Self {
            auc,
            acc,
            f1,
            n_pos,
            n_neg,
            threshold: DEFAULT_THRESHOLD,
            f1_degenerate,
            seeds: None,
            ci95: None,
            per_seed: None,
        })
    }

    /// Mean of per-seed reports with 95% half-widths.
    pub fn aggregate(runs: Vec<EvalReport>, seeds: Vec<u64>) -> Result<Self> {
        let col = |f: fn(&EvalReport) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        let (auc, auc_hw) = ci95(&col(|r| r.auc))?;
        let (acc, acc_hw) = ci95(&col(|r| r.acc))?;
        let (f1, f1_hw) = ci95(&col(|r| r.f1))?;
        Ok(Self {
            auc,
            acc,
            f1,
            n_pos: runs[0].n_pos,
            n_neg: runs[0].n_neg,
            threshold: runs[0].threshold,
            f1_degenerate: runs.iter().any(|r| r.f1_degenerate),
            seeds: Some(seeds),
            ci95: Some(Ci95 {
                auc: auc_hw,
                acc: acc_hw,
                f1: f1_hw,
                method: CiMethod::Normal,
            }),
            per_seed: Some(runs),
        })
    }
}
