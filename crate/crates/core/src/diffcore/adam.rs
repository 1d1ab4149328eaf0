use serde::{Deserialize, Serialize};

use super::{Real, Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Moment accumulators for one list of parameters. Allocated on the first step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new() -> Self {
        Self {
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }
}

/// Subnormal values are replaced by zero. Weight decay drives unused parameters
/// and their moments toward zero, and subnormal arithmetic is slow on most CPUs.
fn flush<T: Real>(x: T) -> T {
    if x.is_subnormal() {
        T::zero()
    } else {
        x
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Real>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(TensorError::Shape {
            op: "adam_step",
            lhs: (params.len(), 1),
            rhs: (grads.len(), 1),
        });
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(TensorError::Shape {
                op: "adam_step",
                lhs: p.shape(),
                rhs: g.shape(),
            });
        }
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        state.v = state.m.clone();
    } else if state.m.len() != params.len()
        || state.m.iter().zip(params.iter()).any(|(m, p)| m.shape() != p.shape())
    {
        return Err(TensorError::Shape {
            op: "adam_step(state)",
            lhs: (state.m.len(), 1),
            rhs: (params.len(), 1),
        });
    }

    state.t += 1;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (lr, eps, wd) = (T::of(cfg.lr), T::of(cfg.eps), T::of(cfg.weight_decay));
    let c1 = T::one() - T::of(cfg.beta1.powi(state.t as i32));
    let c2 = T::one() - T::of(cfg.beta2.powi(state.t as i32));
    let one = T::one();

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (theta, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            let gj = gj + wd * *theta;
            m[j] = flush(b1 * m[j] + (one - b1) * gj);
            v[j] = flush(b2 * v[j] + (one - b2) * gj * gj);
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *theta = flush(*theta - lr * m_hat / (v_hat.sqrt() + eps));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, weight_decay: f64) -> AdamConfig {
        AdamConfig {
            lr,
            weight_decay,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::new(2, 2, vec![1.0f32, -2.0, 3.0, 0.5]).unwrap();
        let before = p.clone();
        let g = Tensor::zeros(2, 2);
        let mut st = AdamState::new();
        for _ in 0..3 {
            adam_step(&mut [&mut p], &[&g], &mut st, &cfg(0.1, 0.0)).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.t, 3);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = g and v_hat = g^2 after one step, so the move is lr * g / (|g| + eps).
        let mut p = Tensor::scalar(2.0f64);
        let g = Tensor::scalar(1.0);
        let mut st = AdamState::new();
        adam_step(&mut [&mut p], &[&g], &mut st, &cfg(0.1, 0.0)).unwrap();
        let expected = 2.0 - 0.1 / (1.0 + 1e-8);
        assert!((p.item() - expected).abs() < 1e-15);
        assert!((2.0 - p.item() - 0.1).abs() < 1e-8);
    }

    #[test]
    fn deterministic_from_same_state() {
        let g = Tensor::new(1, 3, vec![0.3f32, -0.7, 1.1]).unwrap();
        let mut st = AdamState::new();
        let mut p0 = Tensor::new(1, 3, vec![0.1f32, 0.2, 0.3]).unwrap();
        adam_step(&mut [&mut p0], &[&g], &mut st, &AdamConfig::default()).unwrap();
        let (mut a, mut b) = (p0.clone(), p0.clone());
        let (mut sa, mut sb) = (st.clone(), st.clone());
        adam_step(&mut [&mut a], &[&g], &mut sa, &AdamConfig::default()).unwrap();
        adam_step(&mut [&mut b], &[&g], &mut sb, &AdamConfig::default()).unwrap();
        assert_eq!(a.data(), b.data());
        assert_eq!(sa, sb);
    }

    #[test]
    fn zero_lr_is_bitwise_identity() {
        let mut p = Tensor::new(1, 2, vec![0.123f32, -4.5]).unwrap();
        let before = p.clone();
        let g = Tensor::new(1, 2, vec![10.0f32, -3.0]).unwrap();
        adam_step(&mut [&mut p], &[&g], &mut AdamState::new(), &cfg(0.0, 1e-4)).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn subnormal_results_flush_to_zero() {
        assert_eq!(flush(f32::MIN_POSITIVE / 2.0), 0.0);
        assert_eq!(flush(-1e-310f64), 0.0);
        assert_eq!(flush(f32::MIN_POSITIVE), f32::MIN_POSITIVE);
        // a step of half the smallest normal lands in the subnormal range
        let mut p = Tensor::scalar(f32::MIN_POSITIVE);
        let g = Tensor::scalar(1.0f32);
        let step = f64::from(f32::MIN_POSITIVE) / 2.0;
        adam_step(&mut [&mut p], &[&g], &mut AdamState::new(), &cfg(step, 0.0)).unwrap();
        assert_eq!(p.item(), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Tensor::<f32>::zeros(2, 2);
        let g = Tensor::zeros(1, 2);
        let err = adam_step(&mut [&mut p], &[&g], &mut AdamState::new(), &AdamConfig::default());
        assert!(matches!(err, Err(TensorError::Shape { .. })));
    }
}
