//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its output value and the handles of
//! its inputs. [`Tape::backward`] walks the nodes in exact reverse recording
//! order, consumes the tape, and returns the accumulated gradients of every
//! node created with `requires_grad`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use crate::tensor::{Matrix, Real};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberate backward-rule corruptions, used as negative controls for the
/// gradient checker. Never enabled on production paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Sigmoid backward multiplies by `s` instead of `s(1-s)`.
    SigmoidBackward,
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseOperator<T>>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, T),
    AddRow(Var, Var),
    MulCol(Var, Var),
    OneMinus(Var),
    Relu(Var),
    Sigmoid(Var),
    ConcatCols(Vec<Var>),
    RowDot(Vec<Var>, Var),
    Dropout(Var, Matrix<T>),
    SoftmaxXent {
        logits: Var,
        probs: Matrix<T>,
        targets: Vec<(usize, usize)>,
    },
    Sum(Var),
}

struct Node<T> {
    value: Arc<Matrix<T>>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    fault: Option<Fault>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            fault: None,
        }
    }

    pub fn with_fault(fault: Fault) -> Self {
        Self {
            nodes: Vec::new(),
            fault: Some(fault),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf. Parameters pass `requires_grad = true`.
    pub fn leaf(&mut self, value: Matrix<T>, requires_grad: bool) -> Var {
        self.push(Arc::new(value), Op::Leaf, requires_grad)
    }

    /// Records a shared constant without copying it.
    pub fn constant(&mut self, value: Arc<Matrix<T>>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    #[inline]
    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    #[inline]
    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Arc<Matrix<T>>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, value: Matrix<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Arc::new(value), op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.record(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn spmm(&mut self, s: &Arc<SparseOperator<T>>, h: Var) -> Result<Var> {
        let out = s.matrix().spmm(self.value(h))?;
        Ok(self.record(out, Op::SpMM(Arc::clone(s), h), &[h]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.record(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.record(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "hadamard", |x, y| x * y)?;
        Ok(self.record(out, Op::Hadamard(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x * c);
        self.record(out, Op::Scale(a, c), &[a])
    }

    /// `m + 1·row`: adds a `1×d` row vector to every row of `m`.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var> {
        let (mv, rv) = (self.value(m), self.value(row));
        if rv.rows() != 1 || rv.cols() != mv.cols() {
            return Err(Error::shape("add_row", mv.shape(), rv.shape()));
        }
        let mut out = mv.clone();
        let r = rv.as_slice();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(r) {
                *o += b;
            }
        }
        Ok(self.record(out, Op::AddRow(m, row), &[m, row]))
    }

    /// Scales row `i` of `m` by `col[i]` (an `N×1` column broadcast across
    /// the width).
    pub fn mul_col(&mut self, col: Var, m: Var) -> Result<Var> {
        let (cv, mv) = (self.value(col), self.value(m));
        if cv.cols() != 1 || cv.rows() != mv.rows() {
            return Err(Error::shape("mul_col", cv.shape(), mv.shape()));
        }
        let mut out = mv.clone();
        for i in 0..out.rows() {
            let c = cv.get(i, 0);
            for o in out.row_mut(i) {
                *o = c * *o;
            }
        }
        Ok(self.record(out, Op::MulCol(col, m), &[col, m]))
    }

    /// `1 - a` elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| T::one() - x);
        self.record(out, Op::OneMinus(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        self.record(out, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.record(out, Op::Sigmoid(a), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat_cols of nothing".into()))?;
        let rows = self.value(first).rows();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(Error::shape("concat_cols", self.shape(first), self.shape(p)));
            }
        }
        let width: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, width);
        for i in 0..rows {
            let dst = out.row_mut(i);
            let mut at = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(i);
                dst[at..at + src.len()].copy_from_slice(src);
                at += src.len();
            }
        }
        Ok(self.record(out, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Per-row dot product with a `d×1` column vector, giving an `N×1` column.
    pub fn row_dot(&mut self, h: Var, u: Var) -> Result<Var> {
        self.joined_row_dot(&[h], u)
    }

    /// `row_dot(concat_cols(parts), u)` without materializing the
    /// concatenation.
    pub fn joined_row_dot(&mut self, parts: &[Var], u: Var) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("row_dot of nothing".into()))?;
        let (rows, us) = (self.value(first).rows(), self.shape(u));
        let width: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        if us != (width, 1) {
            return Err(Error::shape("row_dot", (rows, width), us));
        }
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(Error::shape("row_dot", self.shape(first), self.shape(p)));
            }
        }
        let uv = self.value(u).as_slice();
        let mut out = Matrix::zeros(rows, 1);
        let mut at = 0;
        for &p in parts {
            let pv = &self.nodes[p.0].value;
            let seg = &uv[at..at + pv.cols()];
            for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
                *o += super::dot(pv.row(i), seg);
            }
            at += pv.cols();
        }
        let mut inputs = parts.to_vec();
        inputs.push(u);
        Ok(self.record(out, Op::RowDot(parts.to_vec(), u), &inputs))
    }

    /// Multiplies by a precomputed mask (entries `0` or `1/(1-p)`).
    pub fn dropout(&mut self, a: Var, mask: Matrix<T>) -> Result<Var> {
        let out = self.value(a).zip_map(&mask, "dropout", |x, m| x * m)?;
        Ok(self.record(out, Op::Dropout(a, mask), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.record(Matrix::filled(1, 1, s), Op::Sum(a), &[a])
    }

    /// Mean over masked rows of `-log softmax(logits)[label]`, stabilized by
    /// subtracting each row's maximum.
    pub fn masked_softmax_cross_entropy(&mut self, logits: Var, labels: &[usize], mask: &[bool]) -> Result<Var> {
        let lv = self.value(logits);
        let (n, c) = lv.shape();
        if labels.len() != n || mask.len() != n {
            return Err(Error::InvalidArgument(format!(
                "cross entropy over {n} rows got {} labels and {} mask entries",
                labels.len(),
                mask.len()
            )));
        }
        let targets: Vec<(usize, usize)> = (0..n).filter(|&i| mask[i]).map(|i| (i, labels[i])).collect();
        if targets.is_empty() {
            return Err(Error::InvalidArgument("cross entropy mask selects no nodes".into()));
        }
        let mut probs = Matrix::zeros(targets.len(), c);
        let mut total = T::zero();
        for (k, &(i, y)) in targets.iter().enumerate() {
            if y >= c {
                return Err(Error::InvalidArgument(format!("label {y} out of range for {c} classes")));
            }
            let row = lv.row(i);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for &v in row {
                z += (v - max).exp();
            }
            let log_z = z.ln() + max;
            total += log_z - row[y];
            for (p, &v) in probs.row_mut(k).iter_mut().zip(row) {
                *p = (v - log_z).exp();
            }
        }
        let loss = total / T::from_usize(targets.len());
        Ok(self.record(
            Matrix::filled(1, 1, loss),
            Op::SoftmaxXent { logits, probs, targets },
            &[logits],
        ))
    }

    /// Reverse pass from a `1×1` loss. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients<T>> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::InvalidArgument(format!("backward needs a scalar loss, got {shape:?}")));
        }
        let Tape { nodes, fault } = self;
        let mut grads: Vec<Option<Matrix<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let needs = |v: Var| nodes[v.0].requires_grad;
            let val = |v: Var| -> &Matrix<T> { &nodes[v.0].value };

            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if needs(*a) {
                        accumulate(&mut grads, *a, g.matmul_nt(val(*b))?);
                    }
                    if needs(*b) {
                        accumulate(&mut grads, *b, val(*a).matmul_tn(&g)?);
                    }
                }
                Op::SpMM(s, h) => {
                    accumulate(&mut grads, *h, s.transposed().spmm(&g)?);
                }
                Op::Add(a, b) => {
                    if needs(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if needs(*b) {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if needs(*b) {
                        accumulate(&mut grads, *b, g.map(|x| -x));
                    }
                    if needs(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Hadamard(a, b) => {
                    if needs(*a) {
                        accumulate(&mut grads, *a, g.zip_map(val(*b), "hadamard", |x, y| x * y)?);
                    }
                    if needs(*b) {
                        accumulate(&mut grads, *b, g.zip_map(val(*a), "hadamard", |x, y| x * y)?);
                    }
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads, *a, g.map(|x| x * c));
                }
                Op::AddRow(m, row) => {
                    if needs(*row) {
                        let mut acc = Matrix::zeros(1, g.cols());
                        for i in 0..g.rows() {
                            for (a, &x) in acc.row_mut(0).iter_mut().zip(g.row(i)) {
                                *a += x;
                            }
                        }
                        accumulate(&mut grads, *row, acc);
                    }
                    if needs(*m) {
                        accumulate(&mut grads, *m, g);
                    }
                }
                Op::MulCol(col, m) => {
                    let (cv, mv) = (val(*col), val(*m));
                    if needs(*col) {
                        let gc = Matrix::from_fn(g.rows(), 1, |i, _| super::dot(g.row(i), mv.row(i)));
                        accumulate(&mut grads, *col, gc);
                    }
                    if needs(*m) {
                        let mut gm = g;
                        for i in 0..gm.rows() {
                            let c = cv.get(i, 0);
                            for x in gm.row_mut(i) {
                                *x = c * *x;
                            }
                        }
                        accumulate(&mut grads, *m, gm);
                    }
                }
                Op::OneMinus(a) => accumulate(&mut grads, *a, g.map(|x| -x)),
                Op::Relu(a) => {
                    let gz = g.zip_map(&node.value, "relu", |x, y| if y > T::zero() { x } else { T::zero() })?;
                    accumulate(&mut grads, *a, gz);
                }
                Op::Sigmoid(a) => {
                    let corrupt = fault == Some(Fault::SigmoidBackward);
                    let gz = g.zip_map(&node.value, "sigmoid", |x, s| {
                        if corrupt {
                            x * s
                        } else {
                            x * s * (T::one() - s)
                        }
                    })?;
                    accumulate(&mut grads, *a, gz);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = nodes[p.0].value.cols();
                        if needs(p) {
                            let piece = Matrix::from_fn(g.rows(), w, |i, j| g.get(i, at + j));
                            accumulate(&mut grads, p, piece);
                        }
                        at += w;
                    }
                }
                Op::RowDot(parts, u) => {
                    let uv = val(*u).as_slice();
                    let mut gu = needs(*u).then(|| Matrix::zeros(uv.len(), 1));
                    let mut at = 0;
                    for &p in parts {
                        let pv = val(p);
                        let w = pv.cols();
                        let seg = &uv[at..at + w];
                        if let Some(gu) = gu.as_mut() {
                            let dst = &mut gu.as_mut_slice()[at..at + w];
                            for (i, &gi) in g.as_slice().iter().enumerate() {
                                for (d, &x) in dst.iter_mut().zip(pv.row(i)) {
                                    *d += gi * x;
                                }
                            }
                        }
                        if needs(p) {
                            let mut gp = Matrix::zeros(pv.rows(), w);
                            for (i, &gi) in g.as_slice().iter().enumerate() {
                                for (d, &x) in gp.row_mut(i).iter_mut().zip(seg) {
                                    *d = gi * x;
                                }
                            }
                            accumulate(&mut grads, p, gp);
                        }
                        at += w;
                    }
                    if let Some(gu) = gu {
                        accumulate(&mut grads, *u, gu);
                    }
                }
                Op::Dropout(a, mask) => {
                    accumulate(&mut grads, *a, g.zip_map(mask, "dropout", |x, m| x * m)?);
                }
                Op::SoftmaxXent { logits, probs, targets } => {
                    let upstream = g.get(0, 0);
                    let scale = upstream / T::from_usize(targets.len());
                    let (n, c) = nodes[logits.0].value.shape();
                    let mut gl = Matrix::zeros(n, c);
                    for (k, &(i, y)) in targets.iter().enumerate() {
                        let dst = gl.row_mut(i);
                        for (d, &p) in dst.iter_mut().zip(probs.row(k)) {
                            *d = p * scale;
                        }
                        dst[y] -= scale;
                    }
                    accumulate(&mut grads, *logits, gl);
                }
                Op::Sum(a) => {
                    let (r, c) = nodes[a.0].value.shape();
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g.get(0, 0)));
                }
            }
        }

        // Only leaves keep their gradients.
        for (idx, node) in nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Gradients of the leaves recorded with `requires_grad`.
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(tape: &Tape<f64>, v: Var) -> f64 {
        tape.value(v).get(0, 0)
    }

    #[test]
    fn relu_and_sigmoid_forward() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Matrix::from_rows(&[[-1.0, 0.0, 2.0]]), false);
        let r = t.relu(x);
        assert_eq!(t.value(r).as_slice(), &[0.0, 0.0, 2.0]);
        let z = t.leaf(Matrix::zeros(1, 1), false);
        let s = t.sigmoid(z);
        assert_eq!(scalar(&t, s), 0.5);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Matrix::zeros(1, 1), true);
        let s = t.sigmoid(x);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().get(0, 0), 0.25);
    }

    #[test]
    fn joined_row_dot_matches_concat_then_matmul() {
        let a = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [0.0, 1.0]]);
        let b = Matrix::from_rows(&[[2.0], [-1.0], [4.0]]);
        let u = Matrix::from_rows(&[[0.3], [-0.7], [1.1]]);
        let run = |fused: bool| {
            let mut t = Tape::<f64>::new();
            let (x, y, w) = (t.leaf(a.clone(), true), t.leaf(b.clone(), true), t.leaf(u.clone(), true));
            let z = if fused {
                t.joined_row_dot(&[x, y], w).unwrap()
            } else {
                let c = t.concat_cols(&[x, y]).unwrap();
                t.matmul(c, w).unwrap()
            };
            let sq = t.hadamard(z, z).unwrap();
            let l = t.sum(sq);
            let value = t.value(z).clone();
            let g = t.backward(l).unwrap();
            (value, [x, y, w].map(|v| g.get(v).unwrap().clone()))
        };
        let (fused, unfused) = (run(true), run(false));
        assert!(fused.0.max_abs_diff(&unfused.0) < 1e-12);
        for (p, q) in fused.1.iter().zip(&unfused.1) {
            assert!(p.max_abs_diff(q) < 1e-12);
        }
    }

    #[test]
    fn hadamard_square_gradient() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Matrix::from_rows(&[[1.0, 2.0]]), true);
        let y = t.hadamard(x, x).unwrap();
        let l = t.sum(y);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap().as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn cross_entropy_small_cases() {
        let mut t = Tape::<f64>::new();
        let z = t.leaf(Matrix::from_rows(&[[0.0, 0.0]]), false);
        let l = t.masked_softmax_cross_entropy(z, &[0], &[true]).unwrap();
        assert!((scalar(&t, l) - std::f64::consts::LN_2).abs() < 1e-15);

        let big = t.leaf(Matrix::from_rows(&[[1000.0, 0.0]]), false);
        let l = t.masked_softmax_cross_entropy(big, &[0], &[true]).unwrap();
        let v = scalar(&t, l);
        assert!(v.is_finite() && v.abs() < 1e-300);

        assert!(t.masked_softmax_cross_entropy(z, &[0], &[false]).is_err());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Matrix::zeros(2, 2), true);
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(Matrix::zeros(2, 3), false);
        let b = t.leaf(Matrix::zeros(2, 2), false);
        let msg = t.add(a, b).unwrap_err().to_string();
        assert!(msg.contains("(2, 3)") && msg.contains("(2, 2)"), "{msg}");
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::<f64>::new();
        let c = t.constant(Arc::new(Matrix::filled(2, 2, 1.0)));
        let w = t.leaf(Matrix::filled(2, 1, 0.5), true);
        let y = t.matmul(c, w).unwrap();
        let l = t.sum(y);
        let g = t.backward(l).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(w).unwrap().as_slice(), &[2.0, 2.0]);
    }
}
