//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation in creation order. Values are computed
//! eagerly; [`Tape::backward`] walks the records in reverse and accumulates
//! (`+=`) gradients into each parent, so a value used twice receives the sum of
//! both contributions.
//!
//! ```
//! use botrgcn::tensor::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::scalar(3.0));
//! let y = tape.mul_elem(w, w).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(w).item(), 6.0);
//! ```

use std::fmt;

use super::{Matrix, TensorError};
use crate::kernels;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A differentiable operation defined outside this module.
///
/// `forward` may cache whatever `backward` needs on `self`. `backward` returns
/// one optional gradient per input, in input order.
pub trait Function {
    fn name(&self) -> &'static str;

    fn forward(&mut self, inputs: &[&Matrix]) -> Result<Matrix, TensorError>;

    fn backward(&self, inputs: &[&Matrix], output: &Matrix, grad: &Matrix) -> Vec<Option<Matrix>>;
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulNt(Var, Var),
    Add(Var, Var),
    MulElem(Var, Var),
    /// `x + bias` with a 1×c bias broadcast over rows.
    AddRow(Var, Var),
    Scale(Var, f64),
    LeakyRelu(Var, f64),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    MeanRows(Var),
    Sum(Var),
    SumSquares(Var),
    BinaryCrossEntropy {
        probs: Var,
        targets: Vec<(usize, f64)>,
        divisor: f64,
    },
    Custom(Box<dyn Function>, Vec<Var>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::MatMulNt(..) => "matmul_nt",
            Op::Add(..) => "add",
            Op::MulElem(..) => "mul_elem",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::MeanRows(..) => "mean_rows",
            Op::Sum(..) => "sum",
            Op::SumSquares(..) => "sum_squares",
            Op::BinaryCrossEntropy { .. } => "binary_cross_entropy",
            Op::Custom(f, _) => f.name(),
        }
    }
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Log clamp used by the cross-entropy op.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.nodes.len()).finish()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zero-filled when `v` does not influence the output.
    pub fn wrt(&self, v: Var) -> Matrix {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Matrix, op: Op, parents: &[Var]) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op.name() });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> TensorError {
        TensorError::ShapeMismatch {
            op,
            left: self.shape(a),
            right: self.shape(b),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.shape(a).1 != self.shape(b).0 {
            return Err(self.mismatch("matmul", a, b));
        }
        let v = kernels::matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`; the natural form for `x · Wᵀ` with `W` stored as out×in.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.shape(a).1 != self.shape(b).1 {
            return Err(self.mismatch("matmul_nt", a, b));
        }
        let v = kernels::matmul_nt(self.value(a), self.value(b));
        self.push(v, Op::MatMulNt(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch("add", a, b));
        }
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b), &[a, b])
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch("mul_elem", a, b));
        }
        let mut v = self.value(a).clone();
        for (x, y) in v.as_mut_slice().iter_mut().zip(self.value(b).as_slice()) {
            *x *= y;
        }
        self.push(v, Op::MulElem(a, b), &[a, b])
    }

    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (_, c) = self.shape(x);
        if self.shape(bias) != (1, c) {
            return Err(self.mismatch("add_row", x, bias));
        }
        let mut v = self.value(x).clone();
        let b = self.value(bias).as_slice().to_vec();
        for r in 0..v.rows() {
            for (o, bi) in v.row_mut(r).iter_mut().zip(&b) {
                *o += bi;
            }
        }
        self.push(v, Op::AddRow(x, bias), &[x, bias])
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Result<Var, TensorError> {
        let mut v = self.value(x).clone();
        v.scale_in_place(k);
        self.push(v, Op::Scale(x, k), &[x])
    }

    /// `y = x` for `x ≥ 0`, `slope·x` otherwise. The derivative at 0 is 1.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var, TensorError> {
        let v = self
            .value(x)
            .map(|t| if t >= 0.0 { t } else { slope * t });
        self.push(v, Op::LeakyRelu(x, slope), &[x])
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let v = softmax_rows(self.value(x));
        self.push(v, Op::SoftmaxRows(x), &[x])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::Empty { op: "concat_cols" });
        };
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(self.mismatch("concat_cols", first, p));
            }
        }
        let width: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut v = Matrix::zeros(rows, width);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                v.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Column means as a 1×d row. Zero rows is an error.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let m = self.value(x);
        if m.rows() == 0 {
            return Err(TensorError::Empty { op: "mean_rows" });
        }
        let mut v = Matrix::zeros(1, m.cols());
        for r in 0..m.rows() {
            for (o, &t) in v.as_mut_slice().iter_mut().zip(m.row(r)) {
                *o += t;
            }
        }
        v.scale_in_place(1.0 / m.rows() as f64);
        self.push(v, Op::MeanRows(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let v = Matrix::scalar(self.value(x).sum());
        self.push(v, Op::Sum(x), &[x])
    }

    pub fn sum_squares(&mut self, x: Var) -> Result<Var, TensorError> {
        let v = Matrix::scalar(self.value(x).sum_squares());
        self.push(v, Op::SumSquares(x), &[x])
    }

    /// Binary cross-entropy on column 1 of an n×2 probability matrix.
    ///
    /// `targets` holds `(row, y)` pairs; the result is
    /// `Σ −[y·ln p + (1−y)·ln(1−p)] / divisor` with `p = probs[row, 1]` and each
    /// log argument clamped at [`LOG_CLAMP`].
    pub fn binary_cross_entropy(
        &mut self,
        probs: Var,
        targets: Vec<(usize, f64)>,
        divisor: f64,
    ) -> Result<Var, TensorError> {
        let p = self.value(probs);
        if p.cols() != 2 {
            return Err(TensorError::ShapeMismatch {
                op: "binary_cross_entropy",
                left: p.shape(),
                right: (p.rows(), 2),
            });
        }
        if targets.is_empty() {
            return Err(TensorError::Empty {
                op: "binary_cross_entropy",
            });
        }
        let mut total = 0.0;
        for &(row, y) in &targets {
            if row >= p.rows() {
                return Err(TensorError::IndexOutOfRange {
                    op: "binary_cross_entropy",
                    index: row,
                    len: p.rows(),
                });
            }
            let yhat = p.get(row, 1);
            total -= y * yhat.max(LOG_CLAMP).ln() + (1.0 - y) * (1.0 - yhat).max(LOG_CLAMP).ln();
        }
        let v = Matrix::scalar(total / divisor);
        self.push(
            v,
            Op::BinaryCrossEntropy {
                probs,
                targets,
                divisor,
            },
            &[probs],
        )
    }

    /// Records an externally defined operation.
    pub fn apply(
        &mut self,
        mut f: Box<dyn Function>,
        inputs: &[Var],
    ) -> Result<Var, TensorError> {
        let v = {
            let vals: Vec<&Matrix> = inputs.iter().map(|&i| self.value(i)).collect();
            f.forward(&vals)?
        };
        self.push(v, Op::Custom(f, inputs.to_vec()), inputs)
    }

    /// Reverse pass from `output`, seeded with ones (the gradient of `sum(output)`).
    pub fn backward(&self, output: Var) -> Result<Gradients, TensorError> {
        let n = output.0 + 1;
        let mut grads: Vec<Option<Matrix>> = vec![None; n];
        let (r, c) = self.shape(output);
        grads[output.0] = Some(Matrix::filled(r, c, 1.0));

        for idx in (0..n).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.is_finite() {
                    return Err(TensorError::NonFiniteGradient {
                        op: self.nodes[i].op.name(),
                    });
                }
            }
        }
        let shapes = self.nodes[..n].iter().map(|nd| nd.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if self.wants(a) {
                    accumulate(&mut grads[a.0], kernels::matmul_nt(g, self.value(b)));
                }
                if self.wants(b) {
                    accumulate(&mut grads[b.0], kernels::matmul_tn(self.value(a), g));
                }
            }
            &Op::MatMulNt(a, b) => {
                // C = A·Bᵀ: dA = dC·B, dB = dCᵀ·A
                if self.wants(a) {
                    accumulate(&mut grads[a.0], kernels::matmul(g, self.value(b)));
                }
                if self.wants(b) {
                    accumulate(&mut grads[b.0], kernels::matmul_tn(g, self.value(a)));
                }
            }
            &Op::Add(a, b) => {
                if self.wants(a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if self.wants(b) {
                    accumulate(&mut grads[b.0], g.clone());
                }
            }
            &Op::MulElem(a, b) => {
                let prod = |m: &Matrix| {
                    let mut out = g.clone();
                    for (o, &x) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
                        *o *= x;
                    }
                    out
                };
                if self.wants(a) {
                    accumulate(&mut grads[a.0], prod(self.value(b)));
                }
                if self.wants(b) {
                    accumulate(&mut grads[b.0], prod(self.value(a)));
                }
            }
            &Op::AddRow(x, bias) => {
                if self.wants(x) {
                    accumulate(&mut grads[x.0], g.clone());
                }
                if self.wants(bias) {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &t) in gb.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *o += t;
                        }
                    }
                    accumulate(&mut grads[bias.0], gb);
                }
            }
            &Op::Scale(x, k) => {
                if self.wants(x) {
                    let mut gx = g.clone();
                    gx.scale_in_place(k);
                    accumulate(&mut grads[x.0], gx);
                }
            }
            &Op::LeakyRelu(x, slope) => {
                if self.wants(x) {
                    let mut gx = g.clone();
                    for (o, &t) in gx.as_mut_slice().iter_mut().zip(self.value(x).as_slice()) {
                        if t < 0.0 {
                            *o *= slope;
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
            }
            &Op::SoftmaxRows(x) => {
                if self.wants(x) {
                    let y = &node.value;
                    let mut gx = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, &yi), &gi) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = yi * (gi - dot);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let (rows, w) = self.shape(p);
                    if self.wants(p) {
                        let mut gp = Matrix::zeros(rows, w);
                        for r in 0..rows {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        accumulate(&mut grads[p.0], gp);
                    }
                    off += w;
                }
            }
            &Op::MeanRows(x) => {
                if self.wants(x) {
                    let (rows, cols) = self.shape(x);
                    let inv = 1.0 / rows as f64;
                    let mut gx = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        for (o, &t) in gx.row_mut(r).iter_mut().zip(g.as_slice()) {
                            *o = t * inv;
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
            }
            &Op::Sum(x) => {
                if self.wants(x) {
                    let (rows, cols) = self.shape(x);
                    accumulate(&mut grads[x.0], Matrix::filled(rows, cols, g.item()));
                }
            }
            &Op::SumSquares(x) => {
                if self.wants(x) {
                    let k = 2.0 * g.item();
                    accumulate(&mut grads[x.0], self.value(x).map(|t| k * t));
                }
            }
            Op::BinaryCrossEntropy {
                probs,
                targets,
                divisor,
            } => {
                if self.wants(*probs) {
                    let p = self.value(*probs);
                    let scale = g.item() / divisor;
                    let mut gp = Matrix::zeros(p.rows(), p.cols());
                    for &(row, y) in targets {
                        let yhat = p.get(row, 1);
                        let mut d = 0.0;
                        if yhat > LOG_CLAMP {
                            d -= y / yhat;
                        }
                        if 1.0 - yhat > LOG_CLAMP {
                            d += (1.0 - y) / (1.0 - yhat);
                        }
                        let cur = gp.get(row, 1);
                        gp.set(row, 1, cur + scale * d);
                    }
                    accumulate(&mut grads[probs.0], gp);
                }
            }
            Op::Custom(f, inputs) => {
                let vals: Vec<&Matrix> = inputs.iter().map(|&i| self.value(i)).collect();
                let gs = f.backward(&vals, &node.value, g);
                debug_assert_eq!(gs.len(), inputs.len());
                for (&inp, gi) in inputs.iter().zip(gs) {
                    if let (true, Some(gi)) = (self.wants(inp), gi) {
                        accumulate(&mut grads[inp.0], gi);
                    }
                }
            }
        }
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}
