//! Gated-attention MIL model.
//!
//! Instances `h_k` are scored by `wᵀ(tanh(V1 h_k) ⊙ sigm(V2 h_k))`, softmaxed
//! into attention weights `a_k`, and pooled. Pooling is written in its
//! average-pooling form: the weighted instance features `ĥ_k = a_k·K·h_k` are
//! kept as an explicit graph node and `F = mean_k ĥ_k`, which is the quantity
//! attribution differentiates against.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{Axis, Graph, Real, Rng, Tensor, TensorError, Var};

pub const PARAMS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty bag: at least one instance is required")]
    EmptyBag,
    #[error("feature dimension {actual} does not match model input dimension {expected}")]
    FeatureDim { expected: usize, actual: usize },
    #[error("attention vector has {actual} entries for {expected} instances")]
    AttentionLength { expected: usize, actual: usize },
    #[error("class {class} out of range for {classes} classes")]
    Class { class: usize, classes: usize },
    #[error("invalid model dimensions: {0}")]
    Dims(String),
    #[error("forward graph has been released")]
    GraphReleased,
    #[error("parameter document: {0}")]
    Format(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbmilDims {
    /// Instance feature dimension.
    #[serde(rename = "D")]
    pub d: usize,
    /// Hidden width of the attention branch.
    #[serde(rename = "D_att")]
    pub d_att: usize,
    /// Number of classes.
    #[serde(rename = "C")]
    pub c: usize,
    /// Hidden width of an optional ReLU layer in the classifier head.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
}

impl AbmilDims {
    pub fn new(d: usize, d_att: usize, c: usize) -> Self {
        Self {
            d,
            d_att,
            c,
            hidden: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d_att == 0 {
            return Err(ModelError::Dims(format!(
                "D and D_att must be positive (D={}, D_att={})",
                self.d, self.d_att
            )));
        }
        if self.c < 2 {
            return Err(ModelError::Dims(format!("C must be at least 2, got {}", self.c)));
        }
        if self.hidden == Some(0) {
            return Err(ModelError::Dims("hidden head width must be positive".into()));
        }
        Ok(())
    }

    fn head_in(&self) -> usize {
        self.hidden.unwrap_or(self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbmilParams<T> {
    pub dims: AbmilDims,
    /// Whether `bc` is trained. When false it stays at zero.
    pub head_bias: bool,
    pub v1: Tensor<T>,
    pub v2: Tensor<T>,
    pub w: Tensor<T>,
    pub wh: Option<Tensor<T>>,
    pub bh: Option<Tensor<T>>,
    pub wc: Tensor<T>,
    pub bc: Tensor<T>,
}

fn uniform_fan_in<T: Real>(rows: usize, cols: usize, fan_in: usize, rng: &mut Rng) -> Tensor<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let data = (0..rows * cols).map(|_| T::of(dist.sample(rng))).collect();
    Tensor::new(rows, cols, data).expect("positive dims")
}

impl<T: Real> AbmilParams<T> {
    /// Fan-in uniform initialization, `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(dims: AbmilDims, head_bias: bool, rng: &mut Rng) -> Result<Self> {
        dims.validate()?;
        let AbmilDims { d, d_att, c, .. } = dims;
        let v1 = uniform_fan_in(d_att, d, d, rng);
        let v2 = uniform_fan_in(d_att, d, d, rng);
        let w = uniform_fan_in(1, d_att, d_att, rng);
        let (wh, bh) = match dims.hidden {
            Some(hd) => (
                Some(uniform_fan_in(hd, d, d, rng)),
                Some(uniform_fan_in(1, hd, d, rng)),
            ),
            None => (None, None),
        };
        let head_in = dims.head_in();
        let wc = uniform_fan_in(c, head_in, head_in, rng);
        let bc = if head_bias {
            uniform_fan_in(1, c, head_in, rng)
        } else {
            Tensor::zeros(1, c)
        };
        Ok(Self {
            dims,
            head_bias,
            v1,
            v2,
            w,
            wh,
            bh,
            wc,
            bc,
        })
    }

    /// All tensors by serialization name.
    pub fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut out = vec![("V1", &self.v1), ("V2", &self.v2), ("w", &self.w)];
        if let (Some(wh), Some(bh)) = (&self.wh, &self.bh) {
            out.push(("Wh", wh));
            out.push(("bh", bh));
        }
        out.push(("Wc", &self.wc));
        out.push(("bc", &self.bc));
        out
    }

    /// Trainable tensors, in the same order as [`ParamVars::trainable`].
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.v1, &mut self.v2, &mut self.w];
        if let (Some(wh), Some(bh)) = (&mut self.wh, &mut self.bh) {
            out.push(wh);
            out.push(bh);
        }
        out.push(&mut self.wc);
        if self.head_bias {
            out.push(&mut self.bc);
        }
        out
    }

    pub fn cast<U: Real>(&self) -> AbmilParams<U> {
        AbmilParams {
            dims: self.dims,
            head_bias: self.head_bias,
            v1: self.v1.cast(),
            v2: self.v2.cast(),
            w: self.w.cast(),
            wh: self.wh.as_ref().map(Tensor::cast),
            bh: self.bh.as_ref().map(Tensor::cast),
            wc: self.wc.cast(),
            bc: self.bc.cast(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.all_finite())
    }

    /// Places the parameters on a graph. With `trainable == false` every tensor
    /// is a constant; otherwise all but a disabled head bias are trainable.
    pub fn register(&self, g: &mut Graph<T>, trainable: bool) -> ParamVars {
        let mut put = |t: &Tensor<T>, train: bool| {
            if train {
                g.param(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        ParamVars {
            v1: put(&self.v1, trainable),
            v2: put(&self.v2, trainable),
            w: put(&self.w, trainable),
            wh: self.wh.as_ref().map(|t| put(t, trainable)),
            bh: self.bh.as_ref().map(|t| put(t, trainable)),
            wc: put(&self.wc, trainable),
            bc: put(&self.bc, trainable && self.head_bias),
            head_bias: self.head_bias,
        }
    }
}

/// Graph handles of one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub v1: Var,
    pub v2: Var,
    pub w: Var,
    pub wh: Option<Var>,
    pub bh: Option<Var>,
    pub wc: Var,
    pub bc: Var,
    head_bias: bool,
}

impl ParamVars {
    pub fn trainable(&self) -> Vec<Var> {
        let mut out = vec![self.v1, self.v2, self.w];
        if let (Some(wh), Some(bh)) = (self.wh, self.bh) {
            out.push(wh);
            out.push(bh);
        }
        out.push(self.wc);
        if self.head_bias {
            out.push(self.bc);
        }
        out
    }
}

/// Graph handles produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub h: Var,
    /// Pre-softmax attention logits, `1 x K`.
    pub logits: Var,
    /// Attention weights, `1 x K`.
    pub a: Var,
    /// Weighted instance features, `K x D`.
    pub h_hat: Var,
    /// Bag embedding, `1 x D`.
    pub f: Var,
    /// Class logits, `1 x C`.
    pub s: Var,
    /// Class probabilities, `1 x C`.
    pub p: Var,
    pub params: ParamVars,
}

/// Gated attention logits `wᵀ(tanh(V1 h_k) ⊙ sigm(V2 h_k))` as a `1 x K` row.
pub fn attention_logits<T: Real>(g: &mut Graph<T>, h: Var, pv: &ParamVars) -> Result<Var> {
    let u = g.matmul_nt(h, pv.v1)?;
    let u = g.tanh(u);
    let v = g.matmul_nt(h, pv.v2)?;
    let v = g.sigmoid(v);
    let gated = g.mul(u, v)?;
    let col = g.matmul_nt(gated, pv.w)?;
    Ok(g.transpose(col))
}

/// Pools `h` with the attention row `a`: returns `(ĥ, F)`.
pub fn pool<T: Real>(g: &mut Graph<T>, h: Var, a: Var) -> Result<(Var, Var)> {
    let k = g.value(h).rows();
    let h_hat = g.scale_rows(h, a, T::of(k as f64))?;
    let f = g.mean(h_hat, Axis::Rows);
    Ok((h_hat, f))
}

/// Classifier head on a `1 x D` embedding: returns `(s, p)`.
pub fn head<T: Real>(g: &mut Graph<T>, f: Var, pv: &ParamVars) -> Result<(Var, Var)> {
    let mut z = f;
    if let (Some(wh), Some(bh)) = (pv.wh, pv.bh) {
        let pre = g.matmul_nt(z, wh)?;
        let pre = g.add_row(pre, bh)?;
        z = g.relu(pre);
    }
    let s = g.matmul_nt(z, pv.wc)?;
    let s = g.add_row(s, pv.bc)?;
    let p = g.softmax_rows(s);
    Ok((s, p))
}

/// Builds the full forward pass for a bag leaf `h`.
pub fn build_forward<T: Real>(g: &mut Graph<T>, h: Var, pv: ParamVars) -> Result<ForwardVars> {
    let logits = attention_logits(g, h, &pv)?;
    let a = g.softmax_rows(logits);
    let (h_hat, f) = pool(g, h, a)?;
    let (s, p) = head(g, f, &pv)?;
    Ok(ForwardVars {
        h,
        logits,
        a,
        h_hat,
        f,
        s,
        p,
        params: pv,
    })
}

/// Output of one forward pass. Keeps its graph until [`AbmilForward::release`]
/// so that logits can be differentiated afterwards.
#[derive(Debug, Clone)]
pub struct AbmilForward<T> {
    graph: Option<Graph<T>>,
    pub vars: ForwardVars,
    /// Raw instance features.
    pub h: Tensor<T>,
    pub a: Vec<T>,
    pub h_hat: Tensor<T>,
    pub f: Vec<T>,
    pub s: Vec<T>,
    pub p_bag: Vec<T>,
}

impl<T: Real> AbmilForward<T> {
    fn from_graph(graph: Graph<T>, vars: ForwardVars) -> Self {
        Self {
            h: graph.value(vars.h).clone(),
            a: graph.value(vars.a).data().to_vec(),
            h_hat: graph.value(vars.h_hat).clone(),
            f: graph.value(vars.f).data().to_vec(),
            s: graph.value(vars.s).data().to_vec(),
            p_bag: graph.value(vars.p).data().to_vec(),
            graph: Some(graph),
            vars,
        }
    }

    pub fn k(&self) -> usize {
        self.h.rows()
    }

    pub fn graph(&self) -> Result<&Graph<T>> {
        self.graph.as_ref().ok_or(ModelError::GraphReleased)
    }

    pub fn graph_mut(&mut self) -> Result<&mut Graph<T>> {
        self.graph.as_mut().ok_or(ModelError::GraphReleased)
    }

    /// Drops the graph, keeping the recorded values.
    pub fn release(&mut self) {
        self.graph = None;
    }

    /// Probability of class 1.
    pub fn positive_prob(&self) -> T {
        self.p_bag[1]
    }
}

fn check_input<T: Real>(h: &Tensor<T>, params: &AbmilParams<T>) -> Result<()> {
    if h.cols() != params.dims.d {
        return Err(ModelError::FeatureDim {
            expected: params.dims.d,
            actual: h.cols(),
        });
    }
    Ok(())
}

/// Full forward pass on a `K x D` bag. With `trainable` the parameters are
/// graph parameters and a loss built on the result can be back-propagated.
pub fn forward_bag<T: Real>(h: &Tensor<T>, params: &AbmilParams<T>, trainable: bool) -> Result<AbmilForward<T>> {
    check_input(h, params)?;
    let mut g = Graph::new();
    let pv = params.register(&mut g, trainable);
    let hv = g.constant(h.clone());
    let vars = build_forward(&mut g, hv, pv)?;
    Ok(AbmilForward::from_graph(g, vars))
}

/// Forward pass over the listed rows of `h`.
pub fn forward_subset<T: Real>(
    h: &Tensor<T>,
    rows: &[usize],
    params: &AbmilParams<T>,
    trainable: bool,
) -> Result<AbmilForward<T>> {
    if rows.is_empty() {
        return Err(ModelError::EmptyBag);
    }
    forward_bag(&h.select_rows(rows)?, params, trainable)
}

/// Forward pass with externally supplied attention weights in place of the
/// gated scorer.
pub fn forward_with_attention<T: Real>(h: &Tensor<T>, a: &[T], params: &AbmilParams<T>) -> Result<AbmilForward<T>> {
    check_input(h, params)?;
    if a.len() != h.rows() {
        return Err(ModelError::AttentionLength {
            expected: h.rows(),
            actual: a.len(),
        });
    }
    let mut g = Graph::new();
    let pv = params.register(&mut g, false);
    let hv = g.constant(h.clone());
    let av = g.constant(Tensor::row_vector(a.to_vec())?);
    let (h_hat, f) = pool(&mut g, hv, av)?;
    let (s, p) = head(&mut g, f, &pv)?;
    let vars = ForwardVars {
        h: hv,
        logits: av,
        a: av,
        h_hat,
        f,
        s,
        p,
        params: pv,
    };
    Ok(AbmilForward::from_graph(g, vars))
}

/// Attention weights for every instance of `h`.
pub fn attention_scores<T: Real>(h: &Tensor<T>, params: &AbmilParams<T>) -> Result<Vec<T>> {
    check_input(h, params)?;
    let mut g = Graph::new();
    let pv = params.register(&mut g, false);
    let hv = g.constant(h.clone());
    let logits = attention_logits(&mut g, hv, &pv)?;
    let a = g.softmax_rows(logits);
    Ok(g.value(a).data().to_vec())
}

/// `F = Σ_k a_k h_k` together with the weighted features `ĥ_k = a_k·K·h_k`.
pub fn bag_embed<T: Real>(h: &Tensor<T>, a: &[T]) -> Result<(Vec<T>, Tensor<T>)> {
    if a.len() != h.rows() {
        return Err(ModelError::AttentionLength {
            expected: h.rows(),
            actual: a.len(),
        });
    }
    let mut g = Graph::new();
    let hv = g.constant(h.clone());
    let av = g.constant(Tensor::row_vector(a.to_vec())?);
    let (h_hat, f) = pool(&mut g, hv, av)?;
    Ok((g.value(f).data().to_vec(), g.value(h_hat).clone()))
}

/// Class logits and probabilities for a bag embedding.
pub fn classify<T: Real>(f: &[T], params: &AbmilParams<T>) -> Result<(Vec<T>, Vec<T>)> {
    if f.len() != params.dims.d {
        return Err(ModelError::FeatureDim {
            expected: params.dims.d,
            actual: f.len(),
        });
    }
    let mut g = Graph::new();
    let pv = params.register(&mut g, false);
    let fv = g.constant(Tensor::row_vector(f.to_vec())?);
    let (s, p) = head(&mut g, fv, &pv)?;
    Ok((g.value(s).data().to_vec(), g.value(p).data().to_vec()))
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorDoc {
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsDoc {
    format_version: u32,
    dims: AbmilDims,
    head_bias: bool,
    tensors: BTreeMap<String, TensorDoc>,
}

impl<T: Real> AbmilParams<T> {
    pub fn to_json(&self) -> Result<String> {
        let tensors = self
            .named()
            .into_iter()
            .map(|(name, t)| {
                let doc = TensorDoc {
                    shape: [t.rows(), t.cols()],
                    values: t.data().iter().map(|x| x.as_f64()).collect(),
                };
                (name.to_string(), doc)
            })
            .collect();
        let doc = ParamsDoc {
            format_version: PARAMS_FORMAT_VERSION,
            dims: self.dims,
            head_bias: self.head_bias,
            tensors,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: ParamsDoc = serde_json::from_str(text)?;
        if doc.format_version != PARAMS_FORMAT_VERSION {
            return Err(ModelError::Format(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        doc.dims.validate()?;
        let AbmilDims { d, d_att, c, hidden } = doc.dims;
        let head_in = doc.dims.head_in();
        let mut take = |name: &str, rows: usize, cols: usize| -> Result<Tensor<T>> {
            let t = doc
                .tensors
                .remove(name)
                .ok_or_else(|| ModelError::Format(format!("missing tensor {name}")))?;
            if t.shape != [rows, cols] {
                return Err(ModelError::Format(format!(
                    "tensor {name} has shape {:?}, expected [{rows}, {cols}]",
                    t.shape
                )));
            }
            let values: Vec<T> = t.values.into_iter().map(T::of).collect();
            Ok(Tensor::new(rows, cols, values)?)
        };
        let v1 = take("V1", d_att, d)?;
        let v2 = take("V2", d_att, d)?;
        let w = take("w", 1, d_att)?;
        let (wh, bh) = match hidden {
            Some(hd) => (Some(take("Wh", hd, d)?), Some(take("bh", 1, hd)?)),
            None => (None, None),
        };
        let wc = take("Wc", c, head_in)?;
        let bc = take("bc", 1, c)?;
        if let Some(extra) = doc.tensors.keys().next() {
            return Err(ModelError::Format(format!("unexpected tensor {extra}")));
        }
        let params = Self {
            dims: doc.dims,
            head_bias: doc.head_bias,
            v1,
            v2,
            w,
            wh,
            bh,
            wc,
            bc,
        };
        if !params.all_finite() {
            return Err(ModelError::Format("non-finite parameter value".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{rng_for, stream};
    use rand_distr::StandardNormal;

    fn params(d: usize, seed: u64) -> AbmilParams<f64> {
        AbmilParams::init(AbmilDims::new(d, 16, 2), true, &mut rng_for(seed, stream::INIT_TIER1)).unwrap()
    }

    fn random_bag(k: usize, d: usize, seed: u64) -> Tensor<f64> {
        let mut rng = rng_for(seed, 99);
        let data = (0..k * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        Tensor::new(k, d, data).unwrap()
    }

    #[test]
    fn singleton_bag_gets_full_attention() {
        let p = params(8, 1);
        let a = attention_scores(&random_bag(1, 8, 2), &p).unwrap();
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn identical_instances_share_attention() {
        let p = params(8, 1);
        let row: Vec<f64> = random_bag(1, 8, 3).into_data();
        let h = Tensor::from_rows(&[row.clone(), row.clone(), row]).unwrap();
        for a in attention_scores(&h, &p).unwrap() {
            assert!((a - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn attention_permutes_with_rows() {
        let p = params(8, 4);
        let h = random_bag(7, 8, 5);
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let a = attention_scores(&h, &p).unwrap();
        let ap = attention_scores(&h.select_rows(&perm).unwrap(), &p).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            assert!((ap[i] - a[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_of_identical_instances() {
        let row: Vec<f64> = vec![0.5, -1.0, 2.0];
        let h = Tensor::from_rows(&[row.clone(), row.clone()]).unwrap();
        let (f, _) = bag_embed(&h, &[0.3, 0.7]).unwrap();
        for (x, y) in f.iter().zip(&row) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_weights_pick_one_instance() {
        let h = random_bag(2, 5, 6);
        let (f, h_hat) = bag_embed(&h, &[1.0, 0.0]).unwrap();
        assert_eq!(f, h.row(0).to_vec());
        assert!(h_hat.row(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn embed_length_mismatch() {
        let h = random_bag(3, 4, 7);
        assert!(matches!(
            bag_embed(&h, &[0.5, 0.5]),
            Err(ModelError::AttentionLength { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn zero_head_is_uninformative() {
        let mut p = params(4, 8);
        p.wc = Tensor::zeros(2, 4);
        p.bc = Tensor::zeros(1, 2);
        let (s, prob) = classify(&[1.0, 2.0, 3.0, 4.0], &p).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
        assert_eq!(prob, vec![0.5, 0.5]);
    }

    #[test]
    fn identity_head_argmax() {
        let mut p = params(3, 9);
        p.dims.c = 3;
        p.wc = Tensor::identity(3);
        p.bc = Tensor::zeros(1, 3);
        for c in 0..3 {
            let mut f = vec![0.0; 3];
            f[c] = 1.0;
            let (_, prob) = classify(&f, &p).unwrap();
            let best = (0..3).max_by(|&i, &j| prob[i].total_cmp(&prob[j])).unwrap();
            assert_eq!(best, c);
        }
    }

    #[test]
    fn wrong_feature_dim() {
        let p = params(8, 1);
        assert!(matches!(
            forward_bag(&random_bag(3, 5, 1), &p, false),
            Err(ModelError::FeatureDim { expected: 8, actual: 5 })
        ));
    }

    #[test]
    fn empty_subset_is_empty_bag() {
        let p = params(4, 1);
        assert!(matches!(
            forward_subset(&random_bag(3, 4, 1), &[], &p, false),
            Err(ModelError::EmptyBag)
        ));
    }

    #[test]
    fn released_graph() {
        let p = params(4, 1);
        let mut fwd = forward_bag(&random_bag(3, 4, 1), &p, false).unwrap();
        assert!(fwd.graph().is_ok());
        fwd.release();
        assert!(matches!(fwd.graph(), Err(ModelError::GraphReleased)));
    }

    #[test]
    fn json_round_trip_f32() {
        let p: AbmilParams<f32> = AbmilParams::init(AbmilDims::new(6, 5, 2), false, &mut rng_for(3, 3)).unwrap();
        let back = AbmilParams::<f32>::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn json_rejects_bad_documents() {
        let p: AbmilParams<f32> = AbmilParams::init(AbmilDims::new(6, 5, 2), true, &mut rng_for(3, 3)).unwrap();
        let text = p.to_json().unwrap();
        let wrong_version = text.replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(
            AbmilParams::<f32>::from_json(&wrong_version),
            Err(ModelError::Format(_))
        ));
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["tensors"].as_object_mut().unwrap().remove("V2");
        assert!(AbmilParams::<f32>::from_json(&v.to_string()).is_err());
    }
}
