#![allow(dead_code)]

use dtfd_mil::abmil::{build_forward, AbmilDims, AbmilParams, ModelError, ParamVars};
use dtfd_mil::diffcore::{grad_check, rng_for, Axis, Elementwise, Graph, Rng, Tensor, TensorError, Var};
use dtfd_mil::dtfd::{split_pseudobags, tier1_loss_on_graph};
use rand::distr::{Distribution, Uniform};
use rand::Rng as _;
use rand_distr::StandardNormal;

pub const FD_EPS: f64 = 1e-6;

pub fn normal(rows: usize, cols: usize, rng: &mut Rng) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> Tensor<f64> {
    let dist = Uniform::new(lo, hi).unwrap();
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Values bounded away from zero, for ops with a kink there.
pub fn away_from_zero(rows: usize, cols: usize, rng: &mut Rng) -> Tensor<f64> {
    let mut t = uniform(rows, cols, 0.1, 2.0, rng);
    for v in t.data_mut() {
        if rng.random_bool(0.5) {
            *v = -*v;
        }
    }
    t
}

pub fn params(d: usize, d_att: usize, head_bias: bool, hidden: Option<usize>, seed: u64) -> AbmilParams<f64> {
    let dims = AbmilDims {
        hidden,
        ..AbmilDims::new(d, d_att, 2)
    };
    AbmilParams::init(dims, head_bias, &mut rng_for(seed, 99)).unwrap()
}

/// Contracts an arbitrary-shape output to a scalar with fixed random weights,
/// so every output element contributes a distinct cotangent.
fn contract(g: &mut Graph<f64>, out: Var, weights: &Tensor<f64>) -> Result<Var, TensorError> {
    let w = g.constant(weights.clone());
    let prod = g.mul(out, w)?;
    Ok(g.sum(prod, Axis::All))
}

pub struct Case {
    pub name: String,
    pub error: f64,
}

type OpFn = Box<dyn Fn(&mut Graph<f64>, Var) -> Result<Var, TensorError>>;

fn check(name: &str, x: &Tensor<f64>, out_shape: (usize, usize), op: OpFn, rng: &mut Rng) -> Case {
    let weights = normal(out_shape.0, out_shape.1, rng);
    let f = move |g: &mut Graph<f64>, v: Var| {
        let out = op(g, v)?;
        contract(g, out, &weights)
    };
    Case {
        name: name.to_string(),
        error: grad_check(f, x, FD_EPS).unwrap(),
    }
}

/// One randomized finite-difference case for every differentiable op.
pub fn op_cases(rng: &mut Rng) -> Vec<Case> {
    let r = rng.random_range(1..5);
    let c = rng.random_range(1..5);
    let k = rng.random_range(1..5);
    let mut cases = Vec::new();

    let other = normal(c, k, rng);
    cases.push(check(
        "matmul_lhs",
        &normal(r, c, rng),
        (r, k),
        Box::new(move |g, x| {
            let b = g.constant(other.clone());
            g.matmul(x, b)
        }),
        rng,
    ));
    let other = normal(r, c, rng);
    cases.push(check(
        "matmul_rhs",
        &normal(c, k, rng),
        (r, k),
        Box::new(move |g, x| {
            let a = g.constant(other.clone());
            g.matmul(a, x)
        }),
        rng,
    ));
    let other = normal(k, c, rng);
    cases.push(check(
        "matmul_nt_lhs",
        &normal(r, c, rng),
        (r, k),
        Box::new(move |g, x| {
            let b = g.constant(other.clone());
            g.matmul_nt(x, b)
        }),
        rng,
    ));
    let other = normal(r, c, rng);
    cases.push(check(
        "matmul_nt_rhs",
        &normal(k, c, rng),
        (r, k),
        Box::new(move |g, x| {
            let a = g.constant(other.clone());
            g.matmul_nt(a, x)
        }),
        rng,
    ));
    cases.push(check("transpose", &normal(r, c, rng), (c, r), Box::new(|g, x| Ok(g.transpose(x))), rng));

    let other = normal(r, c, rng);
    cases.push(check(
        "add",
        &normal(r, c, rng),
        (r, c),
        Box::new(move |g, x| {
            let b = g.constant(other.clone());
            g.add(x, b)
        }),
        rng,
    ));
    let base = normal(r, c, rng);
    cases.push(check(
        "add_row",
        &normal(1, c, rng),
        (r, c),
        Box::new(move |g, x| {
            let a = g.constant(base.clone());
            g.add_row(a, x)
        }),
        rng,
    ));
    let other = normal(r, c, rng);
    cases.push(check(
        "sub",
        &normal(r, c, rng),
        (r, c),
        Box::new(move |g, x| {
            let a = g.constant(other.clone());
            g.sub(a, x)
        }),
        rng,
    ));
    cases.push(check(
        "mul_self",
        &normal(r, c, rng),
        (r, c),
        Box::new(|g, x| g.mul(x, x)),
        rng,
    ));
    let factor: f64 = rng.random_range(-3.0..3.0);
    cases.push(check("scale", &normal(r, c, rng), (r, c), Box::new(move |g, x| Ok(g.scale(x, factor))), rng));
    cases.push(check("tanh", &normal(r, c, rng), (r, c), Box::new(|g, x| Ok(g.tanh(x))), rng));
    cases.push(check("sigmoid", &normal(r, c, rng), (r, c), Box::new(|g, x| Ok(g.sigmoid(x))), rng));
    cases.push(check("exp", &normal(r, c, rng), (r, c), Box::new(|g, x| Ok(g.exp(x))), rng));
    cases.push(check(
        "log",
        &uniform(r, c, 0.2, 3.0, rng),
        (r, c),
        Box::new(|g, x| g.log(x)),
        rng,
    ));
    cases.push(check("relu", &away_from_zero(r, c, rng), (r, c), Box::new(|g, x| Ok(g.relu(x))), rng));
    cases.push(check(
        "softmax_rows",
        &normal(r, c, rng),
        (r, c),
        Box::new(|g, x| Ok(g.softmax_rows(x))),
        rng,
    ));
    for (name, axis, shape) in [
        ("sum_rows", Axis::Rows, (1, c)),
        ("sum_cols", Axis::Cols, (r, 1)),
        ("sum_all", Axis::All, (1, 1)),
    ] {
        cases.push(check(name, &normal(r, c, rng), shape, Box::new(move |g, x| Ok(g.sum(x, axis))), rng));
    }
    for (name, axis, shape) in [
        ("mean_rows", Axis::Rows, (1, c)),
        ("mean_cols", Axis::Cols, (r, 1)),
        ("mean_all", Axis::All, (1, 1)),
    ] {
        cases.push(check(name, &normal(r, c, rng), shape, Box::new(move |g, x| Ok(g.mean(x, axis))), rng));
    }
    let w = normal(1, r, rng);
    cases.push(check(
        "scale_rows_x",
        &normal(r, c, rng),
        (r, c),
        Box::new(move |g, x| {
            let wv = g.constant(w.clone());
            g.scale_rows(x, wv, r as f64)
        }),
        rng,
    ));
    let h = normal(r, c, rng);
    cases.push(check(
        "scale_rows_w",
        &normal(1, r, rng),
        (r, c),
        Box::new(move |g, x| {
            let hv = g.constant(h.clone());
            g.scale_rows(hv, x, r as f64)
        }),
        rng,
    ));
    let (i, j) = (rng.random_range(0..r), rng.random_range(0..c));
    cases.push(check("select", &normal(r, c, rng), (1, 1), Box::new(move |g, x| g.select(x, i, j)), rng));
    let y = f64::from(rng.random_range(0..2u8));
    cases.push(check(
        "bce",
        &uniform(1, 1, 0.05, 0.95, rng),
        (1, 1),
        Box::new(move |g, x| g.bce(x, y)),
        rng,
    ));
    cases.push(check(
        "elementwise_mix",
        &uniform(r, c, 0.2, 2.0, rng),
        (r, c),
        Box::new(|g, x| {
            let t = g.elementwise(Elementwise::Tanh, &[x])?;
            let l = g.elementwise(Elementwise::Log, &[x])?;
            let s = g.elementwise(Elementwise::Sigmoid, &[x])?;
            let m = g.elementwise(Elementwise::Mul, &[t, l])?;
            let e = g.elementwise(Elementwise::Exp, &[s])?;
            let d = g.elementwise(Elementwise::Sub, &[m, e])?;
            let a = g.elementwise(Elementwise::Add, &[d, x])?;
            g.elementwise(Elementwise::Scale(0.5), &[a])
        }),
        rng,
    ));
    cases
}

/// Replaces one named parameter of `pv` with the leaf `x`.
fn substitute(pv: &mut ParamVars, name: &str, x: Var) {
    match name {
        "V1" => pv.v1 = x,
        "V2" => pv.v2 = x,
        "w" => pv.w = x,
        "Wh" => pv.wh = Some(x),
        "bh" => pv.bh = Some(x),
        "Wc" => pv.wc = x,
        "bc" => pv.bc = x,
        other => panic!("unknown parameter {other}"),
    }
}

/// Finite-difference cases for the bag loss of a gated-attention model, with
/// respect to the instance features and each parameter tensor.
pub fn abmil_cases(rng: &mut Rng) -> Vec<Case> {
    let k = rng.random_range(1..7);
    let d = rng.random_range(2..6);
    let d_att = rng.random_range(2..6);
    let hidden = if rng.random_bool(0.5) { Some(rng.random_range(2..5)) } else { None };
    let p = params(d, d_att, true, hidden, rng.random());
    let h = normal(k, d, rng);
    let y = f64::from(rng.random_range(0..2u8));
    let mut cases = Vec::new();

    let p1 = p.clone();
    let f = move |g: &mut Graph<f64>, x: Var| -> Result<Var, ModelError> {
        let pv = p1.register(g, false);
        let fv = build_forward(g, x, pv)?;
        let prob = g.select(fv.p, 0, 1)?;
        Ok(g.bce(prob, y)?)
    };
    cases.push(Case {
        name: "abmil_bag_loss_wrt_h".into(),
        error: grad_check(f, &h, FD_EPS).unwrap(),
    });

    for (name, value) in p.named() {
        let p2 = p.clone();
        let h2 = h.clone();
        let owned = name.to_string();
        let f = move |g: &mut Graph<f64>, x: Var| -> Result<Var, ModelError> {
            let mut pv = p2.register(g, false);
            substitute(&mut pv, &owned, x);
            let hv = g.constant(h2.clone());
            let fv = build_forward(g, hv, pv)?;
            let prob = g.select(fv.p, 0, 1)?;
            Ok(g.bce(prob, y)?)
        };
        cases.push(Case {
            name: format!("abmil_bag_loss_wrt_{name}"),
            error: grad_check(f, value, FD_EPS).unwrap(),
        });
    }
    cases
}

/// Finite-difference cases for the mean pseudo-bag loss of one slide and for a
/// second-tier loss over fixed distilled features.
pub fn dtfd_cases(rng: &mut Rng) -> Vec<Case> {
    let k = rng.random_range(3..12);
    let m = rng.random_range(1..=3.min(k));
    let d = rng.random_range(2..5);
    let p = params(d, 3, true, None, rng.random());
    let h = normal(k, d, rng);
    let label = rng.random_range(0..2u8);
    let groups = split_pseudobags(k, m, rng).unwrap().groups;
    let mut cases = Vec::new();
    for (name, value) in p.named() {
        let (p2, h2, g2, owned) = (p.clone(), h.clone(), groups.clone(), name.to_string());
        let f = move |g: &mut Graph<f64>, x: Var| {
            let mut pv = p2.register(g, false);
            substitute(&mut pv, &owned, x);
            tier1_loss_on_graph(g, &h2, &g2, pv, label)
        };
        cases.push(Case {
            name: format!("tier1_loss_wrt_{name}"),
            error: grad_check(f, value, FD_EPS).unwrap(),
        });
    }

    let feats = normal(m, d, rng);
    let p2 = params(d, 3, true, None, rng.random());
    let f = move |g: &mut Graph<f64>, x: Var| -> Result<Var, ModelError> {
        let pv = p2.register(g, false);
        let fv = build_forward(g, x, pv)?;
        let prob = g.select(fv.p, 0, 1)?;
        Ok(g.bce(prob, f64::from(label))?)
    };
    cases.push(Case {
        name: "tier2_loss_wrt_distilled".into(),
        error: grad_check(f, &feats, FD_EPS).unwrap(),
    });
    cases
}

/// Runs `rounds` randomized rounds of every case family.
pub fn gradient_suite(rounds: usize, seed: u64) -> Vec<Case> {
    let mut rng = rng_for(seed, 7);
    let mut all = Vec::new();
    for _ in 0..rounds {
        all.extend(op_cases(&mut rng));
        all.extend(abmil_cases(&mut rng));
        all.extend(dtfd_cases(&mut rng));
    }
    all
}

pub struct Malformed {
    pub name: &'static str,
    pub bytes: Vec<u8>,
    pub expect: fn(&dtfd_mil::data::FormatError) -> bool,
}

fn header(magic: &[u8; 4], version: u8, dtype: u8, reserved: [u8; 2], k: u32, d: u32) -> Vec<u8> {
    let mut b = magic.to_vec();
    b.extend([version, dtype]);
    b.extend(reserved);
    b.extend(k.to_le_bytes());
    b.extend(d.to_le_bytes());
    b
}

fn with_payload(mut head: Vec<u8>, values: &[f32]) -> Vec<u8> {
    for v in values {
        head.extend(v.to_le_bytes());
    }
    head
}

/// One file per documented parse error.
pub fn malformed_corpus() -> Vec<Malformed> {
    use dtfd_mil::data::FormatError as E;
    let six = [0.5f32, -1.0, 2.0, 3.5, 0.0, 1.0];
    let good = with_payload(header(b"BAGF", 1, 0, [0, 0], 2, 3), &six);
    vec![
        Malformed {
            name: "bad magic",
            bytes: with_payload(header(b"XXXX", 1, 0, [0, 0], 2, 3), &six),
            expect: |e| matches!(e, E::BadMagic(m) if m == b"XXXX"),
        },
        Malformed {
            name: "unsupported version",
            bytes: with_payload(header(b"BAGF", 2, 0, [0, 0], 2, 3), &six),
            expect: |e| matches!(e, E::UnsupportedVersion(2)),
        },
        Malformed {
            name: "unsupported dtype",
            bytes: with_payload(header(b"BAGF", 1, 1, [0, 0], 2, 3), &six),
            expect: |e| matches!(e, E::UnsupportedDtype(1)),
        },
        Malformed {
            name: "reserved bytes set",
            bytes: with_payload(header(b"BAGF", 1, 0, [0, 7], 2, 3), &six),
            expect: |e| matches!(e, E::Reserved([0, 7])),
        },
        Malformed {
            name: "zero instances",
            bytes: header(b"BAGF", 1, 0, [0, 0], 0, 3),
            expect: |e| matches!(e, E::ZeroDim { k: 0, d: 3 }),
        },
        Malformed {
            name: "zero feature width",
            bytes: header(b"BAGF", 1, 0, [0, 0], 2, 0),
            expect: |e| matches!(e, E::ZeroDim { k: 2, d: 0 }),
        },
        Malformed {
            name: "truncated header",
            bytes: good[..10].to_vec(),
            expect: |e| matches!(e, E::Truncated { expected: 16, actual: 10 }),
        },
        Malformed {
            name: "truncated payload",
            bytes: good[..good.len() - 5].to_vec(),
            expect: |e| matches!(e, E::Truncated { expected: 40, actual: 35 }),
        },
        Malformed {
            name: "trailing bytes",
            bytes: [good.clone(), vec![0, 0, 0, 0]].concat(),
            expect: |e| matches!(e, E::Trailing { expected: 40, actual: 44 }),
        },
        Malformed {
            name: "non-finite value",
            bytes: with_payload(header(b"BAGF", 1, 0, [0, 0], 2, 3), &[0.0, 1.0, f32::NAN, 0.0, 0.0, 0.0]),
            expect: |e| matches!(e, E::NonFinite(2)),
        },
        Malformed {
            name: "empty file",
            bytes: Vec::new(),
            expect: |e| matches!(e, E::Truncated { expected: 16, actual: 0 }),
        },
    ]
}

/// AUC by enumerating every (positive, negative) pair.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0usize;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                pairs += 1;
                if scores[i] > scores[j] {
                    credit += 1.0;
                } else if scores[i] == scores[j] {
                    credit += 0.5;
                }
            }
        }
    }
    credit / pairs as f64
}

/// Accuracy and F1 from an explicit confusion matrix at `score >= threshold`.
pub fn confusion_acc_f1(scores: &[f64], labels: &[u8], threshold: f64) -> (f64, f64) {
    let mut m = [[0usize; 2]; 2];
    for (&s, &l) in scores.iter().zip(labels) {
        m[usize::from(l)][usize::from(s >= threshold)] += 1;
    }
    let (tn, fp, fn_, tp) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let acc = (tp + tn) as f64 / scores.len() as f64;
    let f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    (acc, f1)
}

/// Small random scoring problem with both classes present and frequent ties.
pub fn random_scores(rng: &mut Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(2..=30);
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    labels[0] = 1;
    labels[1] = 0;
    let levels = rng.random_range(1..=12);
    let scores = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
    (scores, labels)
}
