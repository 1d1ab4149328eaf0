use super::{Graph, Real, Result, Tensor, TensorError, Var};

/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Compares the reverse-mode gradient of a scalar function against central
/// differences and returns the worst relative error over all elements of `x`.
///
/// `f` receives a fresh graph and the leaf holding `x` each time it is called.
pub fn grad_check<T, E, F>(f: F, x: &Tensor<T>, eps: f64) -> Result<f64, E>
where
    T: Real,
    E: From<TensorError>,
    F: Fn(&mut Graph<T>, Var) -> Result<Var, E>,
{
    let eval = |x: Tensor<T>| -> Result<(Graph<T>, Var, Var), E> {
        let mut g = Graph::new();
        let leaf = g.param(x);
        let out = f(&mut g, leaf)?;
        let shape = g.value(out).shape();
        if shape != (1, 1) {
            return Err(TensorError::NonScalarRoot(shape).into());
        }
        Ok((g, leaf, out))
    };

    let (mut g, leaf, out) = eval(x.clone())?;
    g.backward(out)?;
    let analytic = g
        .grad(leaf)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(x.rows(), x.cols()));

    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += T::of(eps);
        let mut minus = x.clone();
        minus.data_mut()[i] -= T::of(eps);
        let (gp, _, op) = eval(plus)?;
        let (gm, _, om) = eval(minus)?;
        let numeric = (gp.value(op).item().as_f64() - gm.value(om).item().as_f64()) / (2.0 * eps);
        worst = worst.max(relative_error(analytic.data()[i].as_f64(), numeric));
    }
    Ok(worst)
}
