mod common;

use common::{normal, params};
use dtfd_mil::abmil::{
    attention_scores, bag_embed, classify, forward_bag, forward_subset, forward_with_attention, AbmilParams,
    ModelError,
};
use dtfd_mil::diffcore::{rng_for, Tensor};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_is_permutation_invariant(seed in any::<u64>(), k in 1usize..40, d in 1usize..12, bias in any::<bool>()) {
        let mut rng = rng_for(seed, 3);
        let p = params(d, 6, bias, None, seed);
        let h = normal(k, d, &mut rng);
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let a = forward_bag(&h, &p, false).unwrap();
        let b = forward_bag(&h.select_rows(&perm).unwrap(), &p, false).unwrap();
        for c in 0..2 {
            prop_assert!(close(a.s[c], b.s[c], 1e-10));
            prop_assert!(close(a.p_bag[c], b.p_bag[c], 1e-10));
        }
        for (i, &j) in perm.iter().enumerate() {
            prop_assert!(close(b.a[i], a.a[j], 1e-10));
        }
    }

    #[test]
    fn attention_is_a_distribution(seed in any::<u64>(), k in 1usize..50, d in 1usize..10) {
        let mut rng = rng_for(seed, 4);
        let p = params(d, 5, true, None, seed);
        let h = normal(k, d, &mut rng).map(|v| v * 5.0);
        let a = attention_scores(&h, &p).unwrap();
        prop_assert!(a.iter().all(|&x| x >= 0.0 && x <= 1.0));
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_attention_is_average_pooling(seed in any::<u64>(), k in 1usize..30, d in 1usize..10) {
        let mut rng = rng_for(seed, 5);
        let p = params(d, 4, true, None, seed);
        let h = normal(k, d, &mut rng);
        let a = vec![1.0 / k as f64; k];
        let fwd = forward_with_attention(&h, &a, &p).unwrap();
        for j in 0..d {
            let mean = (0..k).map(|i| h.get(i, j)).sum::<f64>() / k as f64;
            prop_assert!(close(fwd.f[j], mean, 1e-12));
        }
        // and the weighted features are the raw instances
        for i in 0..k {
            for j in 0..d {
                prop_assert!(close(fwd.h_hat.get(i, j), h.get(i, j), 1e-12));
            }
        }
    }

    #[test]
    fn embedding_is_mean_of_weighted_features(seed in any::<u64>(), k in 1usize..30, d in 1usize..10) {
        let mut rng = rng_for(seed, 6);
        let h = normal(k, d, &mut rng);
        let raw: Vec<f64> = (0..k).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let total: f64 = raw.iter().sum();
        let a: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let (f, h_hat) = bag_embed(&h, &a).unwrap();
        for j in 0..d {
            let weighted = (0..k).map(|i| a[i] * h.get(i, j)).sum::<f64>();
            let mean_hat = (0..k).map(|i| h_hat.get(i, j)).sum::<f64>() / k as f64;
            prop_assert!(close(f[j], weighted, 1e-12));
            prop_assert!(close(f[j], mean_hat, 1e-12));
        }
    }

    #[test]
    fn head_matches_affine_map(seed in any::<u64>(), d in 1usize..10, bias in any::<bool>()) {
        let mut rng = rng_for(seed, 7);
        let mut p = params(d, 3, bias, None, seed);
        if bias {
            p.bc = normal(1, 2, &mut rng);
        }
        let f: Vec<f64> = normal(1, d, &mut rng).into_data();
        let (s, probs) = classify(&f, &p).unwrap();
        for c in 0..2 {
            let expected = (0..d).map(|j| p.wc.get(c, j) * f[j]).sum::<f64>() + p.bc.get(0, c);
            prop_assert!(close(s[c], expected, 1e-12));
        }
        prop_assert!((probs[0] + probs[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn singleton_bag_attends_fully() {
    let p = params(4, 3, true, None, 1);
    let h = normal(1, 4, &mut rng_for(1, 1));
    let fwd = forward_bag(&h, &p, false).unwrap();
    assert_eq!(fwd.a, vec![1.0]);
    assert_eq!(fwd.f, h.row(0).to_vec());
}

#[test]
fn input_validation() {
    let p = params(4, 3, true, None, 2);
    let wrong = Tensor::<f64>::zeros(3, 5);
    assert!(matches!(
        forward_bag(&wrong, &p, false),
        Err(ModelError::FeatureDim { expected: 4, actual: 5 })
    ));
    let h = Tensor::<f64>::zeros(3, 4);
    assert!(matches!(forward_subset(&h, &[], &p, false), Err(ModelError::EmptyBag)));
    assert!(matches!(
        forward_with_attention(&h, &[0.5, 0.5], &p),
        Err(ModelError::AttentionLength { expected: 3, actual: 2 })
    ));
    assert!(classify(&[0.0; 3], &p).is_err());
}

#[test]
fn serialization_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for hidden in [None, Some(5)] {
        let p: AbmilParams<f32> = params(6, 4, false, hidden, 3).cast();
        let path = dir.path().join("p.json");
        p.save(&path).unwrap();
        let back = AbmilParams::<f32>::load(&path).unwrap();
        assert_eq!(back, p);
    }
}

#[test]
fn malformed_parameter_documents() {
    let p: AbmilParams<f64> = params(3, 2, true, None, 4);
    let good: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();

    let mut version = good.clone();
    version["format_version"] = 9.into();
    assert!(AbmilParams::<f64>::from_json(&version.to_string()).is_err());

    let mut short = good.clone();
    short["tensors"]["V1"]["values"].as_array_mut().unwrap().pop();
    assert!(AbmilParams::<f64>::from_json(&short.to_string()).is_err());

    let mut missing = good;
    missing["tensors"].as_object_mut().unwrap().remove("Wc");
    assert!(AbmilParams::<f64>::from_json(&missing.to_string()).is_err());
}

#[test]
fn trainable_forward_yields_parameter_gradients() {
    let p = params(5, 4, true, Some(3), 5);
    let h = normal(7, 5, &mut rng_for(5, 5));
    let mut fwd = forward_bag(&h, &p, true).unwrap();
    let vars = fwd.vars;
    let g = fwd.graph_mut().unwrap();
    let p1 = g.select(vars.p, 0, 1).unwrap();
    let loss = g.bce(p1, 1.0).unwrap();
    g.backward(loss).unwrap();
    for v in vars.params.trainable() {
        let grad = g.grad(v).expect("every trainable tensor receives a gradient");
        assert!(grad.all_finite());
    }
    fwd.release();
    assert!(matches!(fwd.graph(), Err(ModelError::GraphReleased)));
}
