use super::tensor::dot;
use super::{Real, Result, Tensor, TensorError};

/// Handle to a node of a [`Graph`]. Only meaningful for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Reduction axis. `Rows` collapses the row dimension (column-wise result `1 x cols`),
/// `Cols` collapses the column dimension (`rows x 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
    All,
}

/// Tag for the generic elementwise entry point [`Graph::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Add,
    Sub,
    Mul,
    Scale(f64),
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Relu(Var),
    SoftmaxRows(Var),
    Sum(Var, Axis),
    Mean(Var, Axis),
    ScaleRows { x: Var, w: Var, factor: T },
    Select { x: Var, row: usize, col: usize },
    Bce { p: Var, target: T, clamped: bool },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    grad: Option<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Wengert tape. Nodes are appended in evaluation order, so a node's index is
/// always greater than the indices of its inputs.
///
/// Gradients from [`Graph::backward`] accumulate: two calls without
/// [`Graph::zero_grad`] in between leave doubled gradients behind.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient from [`Graph::backward`].
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.node(v).value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.node(v).grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn check_same(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(TensorError::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul_nt(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMulNt(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push(out, Op::Transpose(a), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Adds the `1 x n` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sb != (1, sa.1) {
            return Err(TensorError::Shape {
                op: "add_row",
                lhs: sa,
                rhs: sb,
            });
        }
        let bias = self.value(b).data().to_vec();
        let mut out = self.value(a).clone();
        for r in out.data_mut().chunks_mut(sa.1) {
            for (o, &x) in r.iter_mut().zip(&bias) {
                *o += x;
            }
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::AddRow(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let out = self.value(a).map(|x| x * factor);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, factor), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(T::tanh);
        let rg = self.rg(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(T::exp);
        let rg = self.rg(&[a]);
        self.push(out, Op::Exp(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(&bad) = self.value(a).data().iter().find(|&&x| !(x > T::zero())) {
            return Err(TensorError::Domain {
                op: "log",
                value: bad.as_f64(),
            });
        }
        let out = self.value(a).map(T::ln);
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Log(a), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(T::zero()));
        let rg = self.rg(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    /// Dispatches on an elementwise tag. Unary tags take one argument, binary tags two.
    pub fn elementwise(&mut self, op: Elementwise, args: &[Var]) -> Result<Var> {
        let arity = match op {
            Elementwise::Add | Elementwise::Sub | Elementwise::Mul => 2,
            _ => 1,
        };
        assert_eq!(args.len(), arity, "{op:?} takes {arity} argument(s)");
        match op {
            Elementwise::Tanh => Ok(self.tanh(args[0])),
            Elementwise::Sigmoid => Ok(self.sigmoid(args[0])),
            Elementwise::Exp => Ok(self.exp(args[0])),
            Elementwise::Log => self.log(args[0]),
            Elementwise::Scale(f) => Ok(self.scale(args[0], T::of(f))),
            Elementwise::Add => self.add(args[0], args[1]),
            Elementwise::Sub => self.sub(args[0], args[1]),
            Elementwise::Mul => self.mul(args[0], args[1]),
        }
    }

    /// Softmax applied independently to every row, with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        let rg = self.rg(&[a]);
        self.push(out, Op::SoftmaxRows(a), rg)
    }

    pub fn sum(&mut self, a: Var, axis: Axis) -> Var {
        let out = reduce_sum(self.value(a), axis);
        let rg = self.rg(&[a]);
        self.push(out, Op::Sum(a, axis), rg)
    }

    pub fn mean(&mut self, a: Var, axis: Axis) -> Var {
        let x = self.value(a);
        let n = T::of(axis_count(x.shape(), axis) as f64);
        let out = reduce_sum(x, axis).map(|v| v / n);
        let rg = self.rg(&[a]);
        self.push(out, Op::Mean(a, axis), rg)
    }

    /// Scales row `k` of `x` by `factor * w[k]`; `w` holds one weight per row.
    pub fn scale_rows(&mut self, x: Var, w: Var, factor: T) -> Result<Var> {
        let (xs, ws) = (self.value(x).shape(), self.value(w).shape());
        if self.value(w).len() != xs.0 || (ws.0 != 1 && ws.1 != 1) {
            return Err(TensorError::Shape {
                op: "scale_rows",
                lhs: xs,
                rhs: ws,
            });
        }
        let weights = self.value(w).data().to_vec();
        let mut out = self.value(x).clone();
        for (row, &wk) in out.data_mut().chunks_mut(xs.1).zip(&weights) {
            let s = factor * wk;
            for v in row {
                *v *= s;
            }
        }
        let rg = self.rg(&[x, w]);
        Ok(self.push(out, Op::ScaleRows { x, w, factor }, rg))
    }

    /// Extracts one element as a `1 x 1` node.
    pub fn select(&mut self, x: Var, row: usize, col: usize) -> Result<Var> {
        let t = self.value(x);
        if row >= t.rows() || col >= t.cols() {
            return Err(TensorError::Index {
                row,
                col,
                shape: t.shape(),
            });
        }
        let out = Tensor::scalar(t.get(row, col));
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Select { x, row, col }, rg))
    }

    /// Binary cross entropy `-[y ln p + (1-y) ln(1-p)]` of a `1 x 1` probability,
    /// with `p` clamped to `[1e-7, 1 - 1e-7]`. The gradient is zero where the clamp is active.
    pub fn bce(&mut self, p: Var, target: f64) -> Result<Var> {
        if target != 0.0 && target != 1.0 {
            return Err(TensorError::Label(target));
        }
        let shape = self.value(p).shape();
        if shape != (1, 1) {
            return Err(TensorError::Shape {
                op: "bce",
                lhs: shape,
                rhs: (1, 1),
            });
        }
        let raw = self.value(p).item();
        let (_, clamped) = clamp_prob(raw);
        let y = T::of(target);
        let loss = bce_value(raw, y);
        let rg = self.rg(&[p]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                p,
                target: y,
                clamped,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar root. Gradients are added to whatever is
    /// already stored on each node.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let shape = self.value(root).shape();
        if shape != (1, 1) {
            return Err(TensorError::NonScalarRoot(shape));
        }
        if !self.requires_grad(root) {
            return Ok(());
        }
        let buf = self.sweep(root, Tensor::scalar(T::one()), 0, true);
        for (node, g) in self.nodes.iter_mut().zip(buf) {
            if let (true, Some(g)) = (node.requires_grad, g) {
                match &mut node.grad {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    /// Vector-Jacobian product `seedᵀ · ∂root/∂target`, ignoring `requires_grad`
    /// flags and leaving stored gradients untouched. Only nodes created after
    /// `target` are visited.
    pub fn vjp(&self, root: Var, seed: Tensor<T>, target: Var) -> Result<Tensor<T>> {
        if seed.shape() != self.value(root).shape() {
            return Err(TensorError::Shape {
                op: "vjp",
                lhs: self.value(root).shape(),
                rhs: seed.shape(),
            });
        }
        if target.0 > root.0 {
            let (r, c) = self.value(target).shape();
            return Ok(Tensor::zeros(r, c));
        }
        let mut buf = self.sweep(root, seed, target.0, false);
        Ok(buf[target.0].take().unwrap_or_else(|| {
            let (r, c) = self.value(target).shape();
            Tensor::zeros(r, c)
        }))
    }

    fn sweep(&self, root: Var, seed: Tensor<T>, floor: usize, respect_rg: bool) -> Vec<Option<Tensor<T>>> {
        let mut buf: Vec<Option<Tensor<T>>> = vec![None; root.0 + 1];
        buf[root.0] = Some(seed);
        for i in (floor..=root.0).rev() {
            let Some(g) = buf[i].take() else { continue };
            let node = &self.nodes[i];
            let wants = |v: Var| v.0 >= floor && (!respect_rg || self.nodes[v.0].requires_grad);
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if wants(*a) {
                        let da = g.matmul_nt(val(*b)).expect("shapes checked in forward");
                        acc(&mut buf, *a, da);
                    }
                    if wants(*b) {
                        let db = val(*a).matmul_tn(&g).expect("shapes checked in forward");
                        acc(&mut buf, *b, db);
                    }
                }
                Op::MatMulNt(a, b) => {
                    if wants(*a) {
                        let da = g.matmul(val(*b)).expect("shapes checked in forward");
                        acc(&mut buf, *a, da);
                    }
                    if wants(*b) {
                        let db = g.matmul_tn(val(*a)).expect("shapes checked in forward");
                        acc(&mut buf, *b, db);
                    }
                }
                Op::Transpose(a) => {
                    if wants(*a) {
                        acc(&mut buf, *a, g.transpose());
                    }
                }
                Op::Add(a, b) => {
                    if wants(*b) {
                        acc(&mut buf, *b, g.clone());
                    }
                    if wants(*a) {
                        acc(&mut buf, *a, g.clone());
                    }
                }
                Op::AddRow(a, b) => {
                    if wants(*b) {
                        acc(&mut buf, *b, reduce_sum(&g, Axis::Rows));
                    }
                    if wants(*a) {
                        acc(&mut buf, *a, g.clone());
                    }
                }
                Op::Sub(a, b) => {
                    if wants(*b) {
                        acc(&mut buf, *b, g.map(|x| -x));
                    }
                    if wants(*a) {
                        acc(&mut buf, *a, g.clone());
                    }
                }
                Op::Mul(a, b) => {
                    if wants(*a) {
                        acc(&mut buf, *a, g.zip_map(val(*b), |d, y| d * y));
                    }
                    if wants(*b) {
                        acc(&mut buf, *b, g.zip_map(val(*a), |d, x| d * x));
                    }
                }
                Op::Scale(a, f) => {
                    if wants(*a) {
                        let f = *f;
                        acc(&mut buf, *a, g.map(|d| d * f));
                    }
                }
                Op::Tanh(a) => {
                    if wants(*a) {
                        let d = g.zip_map(&node.value, |d, y| d * (T::one() - y * y));
                        acc(&mut buf, *a, d);
                    }
                }
                Op::Sigmoid(a) => {
                    if wants(*a) {
                        let d = g.zip_map(&node.value, |d, y| d * y * (T::one() - y));
                        acc(&mut buf, *a, d);
                    }
                }
                Op::Exp(a) => {
                    if wants(*a) {
                        acc(&mut buf, *a, g.zip_map(&node.value, |d, y| d * y));
                    }
                }
                Op::Log(a) => {
                    if wants(*a) {
                        acc(&mut buf, *a, g.zip_map(val(*a), |d, x| d / x));
                    }
                }
                Op::Relu(a) => {
                    if wants(*a) {
                        let d = g.zip_map(val(*a), |d, x| if x > T::zero() { d } else { T::zero() });
                        acc(&mut buf, *a, d);
                    }
                }
                Op::SoftmaxRows(a) => {
                    if wants(*a) {
                        let y = &node.value;
                        let cols = y.cols();
                        let mut d = g.clone();
                        for ((drow, grow), yrow) in d
                            .data_mut()
                            .chunks_mut(cols)
                            .zip(g.data().chunks(cols))
                            .zip(y.data().chunks(cols))
                        {
                            let inner = dot(grow, yrow);
                            for ((o, &gi), &yi) in drow.iter_mut().zip(grow).zip(yrow) {
                                *o = yi * (gi - inner);
                            }
                        }
                        acc(&mut buf, *a, d);
                    }
                }
                Op::Sum(a, axis) | Op::Mean(a, axis) => {
                    if wants(*a) {
                        let shape = val(*a).shape();
                        let scale = match node.op {
                            Op::Mean(..) => T::one() / T::of(axis_count(shape, *axis) as f64),
                            _ => T::one(),
                        };
                        acc(&mut buf, *a, broadcast(&g, shape, *axis, scale));
                    }
                }
                Op::ScaleRows { x, w, factor } => {
                    let xv = val(*x);
                    let cols = xv.cols();
                    if wants(*w) {
                        let dw: Vec<T> = g
                            .data()
                            .chunks(cols)
                            .zip(xv.data().chunks(cols))
                            .map(|(gr, xr)| *factor * dot(gr, xr))
                            .collect();
                        let (r, c) = val(*w).shape();
                        acc(&mut buf, *w, Tensor::new(r, c, dw).expect("same length as w"));
                    }
                    if wants(*x) {
                        let weights = val(*w).data();
                        let mut dx = g.clone();
                        for (row, &wk) in dx.data_mut().chunks_mut(cols).zip(weights) {
                            let s = *factor * wk;
                            for v in row {
                                *v *= s;
                            }
                        }
                        acc(&mut buf, *x, dx);
                    }
                }
                Op::Select { x, row, col } => {
                    if wants(*x) {
                        let (r, c) = val(*x).shape();
                        let mut d = Tensor::zeros(r, c);
                        d.set(*row, *col, g.item());
                        acc(&mut buf, *x, d);
                    }
                }
                Op::Bce { p, target, clamped } => {
                    if wants(*p) {
                        let dp = if *clamped {
                            T::zero()
                        } else {
                            let pv = val(*p).item();
                            let y = *target;
                            -y / pv + (T::one() - y) / (T::one() - pv)
                        };
                        acc(&mut buf, *p, Tensor::scalar(g.item() * dp));
                    }
                }
            }
            buf[i] = Some(g);
        }
        buf
    }
}

fn acc<T: Real>(buf: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
    match &mut buf[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Clamped binary cross entropy of probability `p` against target `y`.
pub fn bce_value<T: Real>(p: T, y: T) -> T {
    let (pc, _) = clamp_prob(p);
    -(y * pc.ln() + (T::one() - y) * (T::one() - pc).ln())
}

fn clamp_prob<T: Real>(p: T) -> (T, bool) {
    let eps = T::of(T::BCE_EPS);
    let hi = T::one() - eps;
    if p < eps {
        (eps, true)
    } else if p > hi {
        (hi, true)
    } else {
        (p, false)
    }
}

pub fn softmax_rows<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let cols = x.cols();
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(cols) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

fn axis_count(shape: (usize, usize), axis: Axis) -> usize {
    match axis {
        Axis::Rows => shape.0,
        Axis::Cols => shape.1,
        Axis::All => shape.0 * shape.1,
    }
}

fn reduce_sum<T: Real>(x: &Tensor<T>, axis: Axis) -> Tensor<T> {
    let (r, c) = x.shape();
    match axis {
        Axis::Rows => {
            let mut out = Tensor::zeros(1, c);
            for row in x.data().chunks(c) {
                for (o, &v) in out.data_mut().iter_mut().zip(row) {
                    *o += v;
                }
            }
            out
        }
        Axis::Cols => {
            let sums = x.data().chunks(c).map(|row| row.iter().copied().sum()).collect();
            Tensor::new(r, 1, sums).expect("r >= 1")
        }
        Axis::All => Tensor::scalar(x.sum()),
    }
}

fn broadcast<T: Real>(g: &Tensor<T>, shape: (usize, usize), axis: Axis, scale: T) -> Tensor<T> {
    let (r, c) = shape;
    let mut out = Tensor::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            let v = match axis {
                Axis::Rows => g.get(0, j),
                Axis::Cols => g.get(i, 0),
                Axis::All => g.item(),
            };
            out.set(i, j, v * scale);
        }
    }
    out
}
