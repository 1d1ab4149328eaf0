//! Per-instance class evidence for an attention MIL forward pass.
//!
//! For class `c`, the channel weights are the gradient of the logit `s_c`
//! with respect to the weighted instance features, averaged over instances:
//! `β_d^c = (1/K) Σ_i ∂s_c/∂ĥ_{i,d}`. The signal of instance `k` is
//! `L_k^c = β^c · ĥ_k` and its class probabilities are the softmax of `L_k`.

use std::io::Write;

use serde::Serialize;

use crate::abmil::{forward_bag, AbmilForward, AbmilParams, ModelError, Result};
use crate::diffcore::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAttribution<T> {
    /// Raw attention weights `a_k`.
    pub a: Vec<T>,
    /// Signal strengths, `K x C`.
    pub signals: Tensor<T>,
    /// Instance class probabilities, `K x C`.
    pub probs: Tensor<T>,
    /// Min-max normalized attention.
    pub a_norm: Vec<T>,
    /// Channel weights, `C x D`.
    pub beta: Tensor<T>,
}

impl<T: Real> InstanceAttribution<T> {
    pub fn k(&self) -> usize {
        self.a.len()
    }

    /// `p_k^1` for every instance.
    pub fn positive_probs(&self) -> Vec<T> {
        (0..self.probs.rows()).map(|k| self.probs.get(k, 1)).collect()
    }

    /// Instance indices ordered by decreasing positive probability (ties by index).
    pub fn rank_by_probability(&self) -> Vec<usize> {
        rank_desc(&self.positive_probs())
    }

    /// Instance indices ordered by decreasing normalized attention (ties by index).
    pub fn rank_by_attention(&self) -> Vec<usize> {
        rank_desc(&self.a_norm)
    }
}

fn rank_desc<T: Real>(values: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    idx
}

/// `β^c`: mean over instances of `∂s_c/∂ĥ_i`, by reverse-mode differentiation of `s_c`.
pub fn channel_weights<T: Real>(forward: &AbmilForward<T>, class: usize) -> Result<Vec<T>> {
    let classes = forward.s.len();
    if class >= classes {
        return Err(ModelError::Class { class, classes });
    }
    let graph = forward.graph()?;
    let mut seed = Tensor::zeros(1, classes);
    seed.set(0, class, T::one());
    let grad = graph.vjp(forward.vars.s, seed, forward.vars.h_hat)?;
    let k = T::of(grad.rows() as f64);
    let d = grad.cols();
    let mut beta = vec![T::zero(); d];
    for row in grad.data().chunks(d) {
        for (b, &x) in beta.iter_mut().zip(row) {
            *b += x;
        }
    }
    Ok(beta.into_iter().map(|b| b / k).collect())
}

/// `L_k^c = β^c · ĥ_k`, as a `K x C` matrix. `beta` holds one row per class.
pub fn instance_signals<T: Real>(h_hat: &Tensor<T>, beta: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(h_hat.matmul_nt(beta)?)
}

/// Row-wise softmax of the signal matrix.
pub fn instance_probs<T: Real>(signals: &Tensor<T>) -> Tensor<T> {
    crate::diffcore::softmax_rows(signals)
}

/// `(a_k - a_min) / (a_max - a_min)`; all zeros when the scores are (numerically) equal.
pub fn normalize_attention<T: Real>(a: &[T]) -> Vec<T> {
    let lo = a.iter().copied().fold(T::infinity(), T::min);
    let hi = a.iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    if a.is_empty() || !(span.as_f64() > 1e-12) {
        return vec![T::zero(); a.len()];
    }
    a.iter().map(|&x| (x - lo) / span).collect()
}

/// All attribution quantities for an existing forward pass.
pub fn attribute_forward<T: Real>(forward: &AbmilForward<T>) -> Result<InstanceAttribution<T>> {
    let classes = forward.s.len();
    let mut rows = Vec::with_capacity(classes);
    for c in 0..classes {
        rows.push(channel_weights(forward, c)?);
    }
    let beta = Tensor::from_rows(&rows)?;
    let signals = instance_signals(&forward.h_hat, &beta)?;
    let probs = instance_probs(&signals);
    Ok(InstanceAttribution {
        a: forward.a.clone(),
        a_norm: normalize_attention(&forward.a),
        signals,
        probs,
        beta,
    })
}

/// Runs the model on a bag and attributes its prediction to the instances.
pub fn attribute_bag<T: Real>(h: &Tensor<T>, params: &AbmilParams<T>) -> Result<InstanceAttribution<T>> {
    let forward = forward_bag(h, params, false)?;
    attribute_forward(&forward)
}

/// One row of the attribution CSV export.
#[derive(Debug, Clone, Serialize)]
pub struct AttributionRow<'a> {
    pub bag_id: &'a str,
    pub instance_index: usize,
    pub a_raw: f64,
    pub a_norm: f64,
    #[serde(rename = "L_neg")]
    pub l_neg: f64,
    #[serde(rename = "L_pos")]
    pub l_pos: f64,
    pub p_pos: f64,
}

/// Appends one bag's rows (two-class models only). The header is written by
/// the `csv` writer on first use.
pub fn write_attribution_rows<T: Real, W: Write>(
    out: &mut csv::Writer<W>,
    bag_id: &str,
    attr: &InstanceAttribution<T>,
) -> std::result::Result<(), csv::Error> {
    assert_eq!(attr.signals.cols(), 2, "attribution export expects two classes");
    for k in 0..attr.k() {
        out.serialize(AttributionRow {
            bag_id,
            instance_index: k,
            a_raw: attr.a[k].as_f64(),
            a_norm: attr.a_norm[k].as_f64(),
            l_neg: attr.signals.get(k, 0).as_f64(),
            l_pos: attr.signals.get(k, 1).as_f64(),
            p_pos: attr.probs.get(k, 1).as_f64(),
        })?;
    }
    Ok(())
}
