//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Nodes are appended in evaluation order, so the tape index is already a
//! topological order; [`Tape::backward`] walks it once in reverse.

use super::tensor::{matmul_into, matmul_nt_into, matmul_tn_acc, transpose};
use super::{NnError, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Numeric precision of the values a tape produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    /// Every op output is rounded to the nearest `f32`.
    F32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bcast {
    Same,
    Row,
    Scalar,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulT(usize, usize),
    Add(usize, usize, Bcast),
    Sub(usize, usize, Bcast),
    Mul(usize, usize, Bcast),
    Scale(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Gelu(usize),
    Softmax(usize),
    LayerNorm { input: usize, inv_std: Vec<f64> },
    Embedding { table: usize, ids: Vec<usize> },
    Mse(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Slice { input: usize, offset: usize },
    NarrowCols { input: usize, start: usize },
    ConcatCols(Vec<usize>),
    Sum(usize),
    Mean(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    precision: Precision,
    strict_finite: bool,
}

/// Gradients of a scalar loss with respect to every trainable leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    visited: usize,
}

impl Gradients {
    /// `None` for constants and frozen leaves.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn contains(&self, v: Var) -> bool {
        self.get(v).is_some()
    }

    /// Number of leaves holding a gradient.
    pub fn len(&self) -> usize {
        self.grads.iter().filter(|g| g.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of nodes the backward sweep processed.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub const LAYER_NORM_EPS: f64 = 1e-12;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_precision(precision: Precision) -> Self {
        Self {
            precision,
            ..Self::default()
        }
    }

    /// Reject non-finite op inputs with [`NnError::NonFinite`].
    pub fn set_strict_finite(&mut self, strict: bool) {
        self.strict_finite = strict;
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Var {
        let t = self.round(t);
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn round(&self, mut t: Tensor) -> Tensor {
        if self.precision == Precision::F32 {
            t.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
        t
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[usize]) -> Var {
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        let value = self.round(value);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn check_finite(&self, op: &'static str, inputs: &[Var]) -> Result<(), NnError> {
        if self.strict_finite && inputs.iter().any(|v| !self.nodes[v.0].value.all_finite()) {
            return Err(NnError::NonFinite { op });
        }
        Ok(())
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> NnError {
        NnError::ShapeMismatch {
            op,
            left: self.value(a).shape().to_vec(),
            right: self.value(b).shape().to_vec(),
        }
    }

    fn bcast_kind(&self, op: &'static str, a: Var, b: Var) -> Result<Bcast, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            Ok(Bcast::Same)
        } else if tb.len() == 1 {
            Ok(Bcast::Scalar)
        } else if tb.rows() == 1 && tb.cols() == ta.cols() {
            Ok(Bcast::Row)
        } else {
            Err(self.mismatch(op, a, b))
        }
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(usize, usize, Bcast) -> Op,
    ) -> Result<Var, NnError> {
        self.check_finite(name, &[a, b])?;
        let kind = self.bcast_kind(name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let cols = ta.cols();
        let data: Vec<f64> = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = match kind {
                    Bcast::Same => tb.data()[i],
                    Bcast::Row => tb.data()[i % cols],
                    Bcast::Scalar => tb.data()[0],
                };
                f(x, y)
            })
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, make(a.0, b.0, kind), &[a.0, b.0]))
    }

    /// Elementwise sum; `b` may be a same-shape tensor, a row vector, or a scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, NnError> {
        self.check_finite("scale", &[a])?;
        let t = self.value(a);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| x * c).collect())?;
        Ok(self.push(out, Op::Scale(a.0, c), &[a.0]))
    }

    /// `a[m x k] * b[k x n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.check_finite("matmul", &[a, b])?;
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.rows(), ta.cols());
        if tb.shape().len() > 2 || tb.rows() != k {
            return Err(self.mismatch("matmul", a, b));
        }
        let n = tb.cols();
        let mut out = vec![0.0; m * n];
        matmul_into(ta.data(), tb.data(), m, k, n, &mut out);
        let out = Tensor::matrix(m, n, out)?;
        Ok(self.push(out, Op::MatMul(a.0, b.0), &[a.0, b.0]))
    }

    /// `a[m x k] * b[n x k]^T`, the dense-layer product for `[out x in]` weights.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.check_finite("matmul_t", &[a, b])?;
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.rows(), ta.cols());
        if tb.shape().len() > 2 || tb.cols() != k {
            return Err(self.mismatch("matmul_t", a, b));
        }
        let n = tb.rows();
        let mut out = vec![0.0; m * n];
        matmul_nt_into(ta.data(), tb.data(), m, k, n, &mut out);
        let out = Tensor::matrix(m, n, out)?;
        Ok(self.push(out, Op::MatMulT(a.0, b.0), &[a.0, b.0]))
    }

    fn unary(
        &mut self,
        name: &'static str,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<Var, NnError> {
        self.check_finite(name, &[a])?;
        let t = self.value(a);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())?;
        Ok(self.push(out, op, &[a.0]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NnError> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NnError> {
        self.unary("tanh", a, f64::tanh, Op::Tanh(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NnError> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu(a.0))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var, NnError> {
        self.unary("gelu", a, gelu, Op::Gelu(a.0))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var, NnError> {
        self.check_finite("softmax", &[a])?;
        let t = self.value(a);
        let cols = t.cols();
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(cols) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let out = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(out, Op::Softmax(a.0), &[a.0]))
    }

    /// Per-row standardisation without affine parameters.
    pub fn layer_norm(&mut self, a: Var) -> Result<Var, NnError> {
        self.check_finite("layer_norm", &[a])?;
        let t = self.value(a);
        let cols = t.cols();
        let mut out = t.data().to_vec();
        let mut inv_std = Vec::with_capacity(t.rows());
        for row in out.chunks_mut(cols) {
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let out = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(out, Op::LayerNorm { input: a.0, inv_std }, &[a.0]))
    }

    /// Gathers rows of `table[vocab x dim]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var, NnError> {
        self.check_finite("embedding", &[table])?;
        let t = self.value(table);
        let (vocab, dim) = (t.rows(), t.cols());
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            if id >= vocab {
                return Err(NnError::IndexOutOfRange { index: id, len: vocab });
            }
            out.extend_from_slice(t.row(id));
        }
        let out = Tensor::matrix(ids.len(), dim, out)?;
        Ok(self.push(
            out,
            Op::Embedding {
                table: table.0,
                ids: ids.to_vec(),
            },
            &[table.0],
        ))
    }

    /// Mean squared error between same-shape tensors.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, NnError> {
        self.check_finite("mse", &[pred, target])?;
        let (a, b) = (self.value(pred), self.value(target));
        if a.shape() != b.shape() {
            return Err(self.mismatch("mse", pred, target));
        }
        let n = a.len().max(1) as f64;
        let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        Ok(self.push(Tensor::scalar(sum / n), Op::Mse(pred.0, target.0), &[pred.0, target.0]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.value(a);
        let (r, c) = (t.rows(), t.cols());
        let out = Tensor::matrix(c, r, transpose(t.data(), r, c))?;
        Ok(self.push(out, Op::Transpose(a.0), &[a.0]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, NnError> {
        let out = self.value(a).clone().reshaped(shape.to_vec())?;
        Ok(self.push(out, Op::Reshape(a.0), &[a.0]))
    }

    /// Contiguous flat range `offset..offset+prod(shape)`, reshaped.
    pub fn slice(&mut self, a: Var, offset: usize, shape: &[usize]) -> Result<Var, NnError> {
        let t = self.value(a);
        let n: usize = shape.iter().product();
        if offset + n > t.len() {
            return Err(NnError::IndexOutOfRange {
                index: offset + n,
                len: t.len(),
            });
        }
        let out = Tensor::new(shape.to_vec(), t.data()[offset..offset + n].to_vec())?;
        Ok(self.push(out, Op::Slice { input: a.0, offset }, &[a.0]))
    }

    /// Columns `start..start+len` of a matrix.
    pub fn narrow_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let t = self.value(a);
        let (r, c) = (t.rows(), t.cols());
        if start + len > c {
            return Err(NnError::IndexOutOfRange {
                index: start + len,
                len: c,
            });
        }
        let mut out = Vec::with_capacity(r * len);
        for row in 0..r {
            out.extend_from_slice(&t.data()[row * c + start..row * c + start + len]);
        }
        let out = Tensor::matrix(r, len, out)?;
        Ok(self.push(out, Op::NarrowCols { input: a.0, start }, &[a.0]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let Some(&first) = parts.first() else {
            return Err(NnError::Empty("concat_cols"));
        };
        let rows = self.value(first).rows();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(self.mismatch("concat_cols", first, p));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::matrix(rows, total, out)?;
        let idx: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.push(out, Op::ConcatCols(idx.clone()), &idx))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NnError> {
        let s = self.value(a).data().iter().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(a.0), &[a.0]))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len().max(1) as f64;
        Ok(self.push(Tensor::scalar(s), Op::Mean(a.0), &[a.0]))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(NnError::NonScalarLoss(lt.shape().to_vec()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        let mut visited = 0;
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            visited += 1;
            self.propagate(i, &g, &mut grads);
        }
        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match (&node.op, node.requires_grad) {
                (Op::Leaf, true) => Some(
                    Tensor::new(
                        node.value.shape().to_vec(),
                        g.unwrap_or_else(|| vec![0.0; node.value.len()]),
                    )
                    .expect("gradient shape"),
                ),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, visited })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let wants = |j: usize| nodes[j].requires_grad;
        let mut acc = |j: usize, f: &mut dyn FnMut(&mut [f64])| {
            let buf = grads[j].get_or_insert_with(|| vec![0.0; nodes[j].value.len()]);
            f(buf);
        };
        let out = &nodes[i].value;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if wants(*a) {
                    let mut tmp = vec![0.0; m * k];
                    matmul_nt_into(g, tb.data(), m, n, k, &mut tmp);
                    acc(*a, &mut |buf| add_into(buf, &tmp));
                }
                if wants(*b) {
                    acc(*b, &mut |buf| matmul_tn_acc(ta.data(), g, m, k, n, buf));
                }
            }
            Op::MatMulT(a, b) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
                if wants(*a) {
                    let mut tmp = vec![0.0; m * k];
                    matmul_into(g, tb.data(), m, n, k, &mut tmp);
                    acc(*a, &mut |buf| add_into(buf, &tmp));
                }
                if wants(*b) {
                    // d b[n x k] = g^T[n x m] * a[m x k]
                    acc(*b, &mut |buf| matmul_tn_acc(g, ta.data(), m, n, k, buf));
                }
            }
            Op::Add(a, b, kind) | Op::Sub(a, b, kind) => {
                let sign = if matches!(nodes[i].op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if wants(*a) {
                    acc(*a, &mut |buf| add_into(buf, g));
                }
                if wants(*b) {
                    let cols = out.cols();
                    acc(*b, &mut |buf| reduce_bcast(buf, g, *kind, cols, sign, None));
                }
            }
            Op::Mul(a, b, kind) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                let cols = out.cols();
                if wants(*a) {
                    acc(*a, &mut |buf| {
                        for (idx, v) in buf.iter_mut().enumerate() {
                            let y = match kind {
                                Bcast::Same => tb.data()[idx],
                                Bcast::Row => tb.data()[idx % cols],
                                Bcast::Scalar => tb.data()[0],
                            };
                            *v += g[idx] * y;
                        }
                    });
                }
                if wants(*b) {
                    acc(*b, &mut |buf| reduce_bcast(buf, g, *kind, cols, 1.0, Some(ta.data())));
                }
            }
            Op::Scale(a, c) => {
                if wants(*a) {
                    acc(*a, &mut |buf| buf.iter_mut().zip(g).for_each(|(v, gv)| *v += gv * c));
                }
            }
            Op::Sigmoid(a) => {
                if wants(*a) {
                    acc(*a, &mut |buf| {
                        for ((v, gv), y) in buf.iter_mut().zip(g).zip(out.data()) {
                            *v += gv * y * (1.0 - y);
                        }
                    });
                }
            }
            Op::Tanh(a) => {
                if wants(*a) {
                    acc(*a, &mut |buf| {
                        for ((v, gv), y) in buf.iter_mut().zip(g).zip(out.data()) {
                            *v += gv * (1.0 - y * y);
                        }
                    });
                }
            }
            Op::Relu(a) => {
                let x = &nodes[*a].value;
                if wants(*a) {
                    acc(*a, &mut |buf| {
                        for ((v, gv), xv) in buf.iter_mut().zip(g).zip(x.data()) {
                            if *xv > 0.0 {
                                *v += gv;
                            }
                        }
                    });
                }
            }
            Op::Gelu(a) => {
                let x = &nodes[*a].value;
                if wants(*a) {
                    acc(*a, &mut |buf| {
                        for ((v, gv), xv) in buf.iter_mut().zip(g).zip(x.data()) {
                            *v += gv * gelu_grad(*xv);
                        }
                    });
                }
            }
            Op::Softmax(a) => {
                if wants(*a) {
                    let cols = out.cols();
                    acc(*a, &mut |buf| {
                        for ((brow, grow), yrow) in buf
                            .chunks_mut(cols)
                            .zip(g.chunks(cols))
                            .zip(out.data().chunks(cols))
                        {
                            let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                            for ((v, gv), y) in brow.iter_mut().zip(grow).zip(yrow) {
                                *v += y * (gv - dot);
                            }
                        }
                    });
                }
            }
            Op::LayerNorm { input, inv_std } => {
                if wants(*input) {
                    let cols = out.cols();
                    let nf = cols as f64;
                    acc(*input, &mut |buf| {
                        for (r, ((brow, grow), yrow)) in buf
                            .chunks_mut(cols)
                            .zip(g.chunks(cols))
                            .zip(out.data().chunks(cols))
                            .enumerate()
                        {
                            let gm = grow.iter().sum::<f64>() / nf;
                            let gy = grow.iter().zip(yrow).map(|(a, b)| a * b).sum::<f64>() / nf;
                            for ((v, gv), y) in brow.iter_mut().zip(grow).zip(yrow) {
                                *v += inv_std[r] * (gv - gm - y * gy);
                            }
                        }
                    });
                }
            }
            Op::Embedding { table, ids } => {
                if wants(*table) {
                    let dim = out.cols();
                    acc(*table, &mut |buf| {
                        for (row, &id) in ids.iter().enumerate() {
                            let src = &g[row * dim..(row + 1) * dim];
                            add_into(&mut buf[id * dim..(id + 1) * dim], src);
                        }
                    });
                }
            }
            Op::Mse(a, b) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                let scale = 2.0 * g[0] / ta.len().max(1) as f64;
                for (j, sign) in [(*a, 1.0), (*b, -1.0)] {
                    if wants(j) {
                        acc(j, &mut |buf| {
                            for ((v, x), y) in buf.iter_mut().zip(ta.data()).zip(tb.data()) {
                                *v += sign * scale * (x - y);
                            }
                        });
                    }
                }
            }
            Op::Transpose(a) => {
                if wants(*a) {
                    let (r, c) = (out.rows(), out.cols());
                    let back = transpose(g, r, c);
                    acc(*a, &mut |buf| add_into(buf, &back));
                }
            }
            Op::Reshape(a) => {
                if wants(*a) {
                    acc(*a, &mut |buf| add_into(buf, g));
                }
            }
            Op::Slice { input, offset } => {
                if wants(*input) {
                    let n = g.len();
                    acc(*input, &mut |buf| add_into(&mut buf[*offset..*offset + n], g));
                }
            }
            Op::NarrowCols { input, start } => {
                if wants(*input) {
                    let full = nodes[*input].value.cols();
                    let len = out.cols();
                    acc(*input, &mut |buf| {
                        for (r, grow) in g.chunks(len).enumerate() {
                            add_into(&mut buf[r * full + start..r * full + start + len], grow);
                        }
                    });
                }
            }
            Op::ConcatCols(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = nodes[p].value.cols();
                    if wants(p) {
                        acc(p, &mut |buf| {
                            for (r, brow) in buf.chunks_mut(w).enumerate() {
                                add_into(brow, &g[r * total + offset..r * total + offset + w]);
                            }
                        });
                    }
                    offset += w;
                }
            }
            Op::Sum(a) => {
                if wants(*a) {
                    acc(*a, &mut |buf| buf.iter_mut().for_each(|v| *v += g[0]));
                }
            }
            Op::Mean(a) => {
                if wants(*a) {
                    let n = nodes[*a].value.len().max(1) as f64;
                    acc(*a, &mut |buf| buf.iter_mut().for_each(|v| *v += g[0] / n));
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Accumulates `sign * g (* other)` into a possibly broadcast operand.
fn reduce_bcast(buf: &mut [f64], g: &[f64], kind: Bcast, cols: usize, sign: f64, other: Option<&[f64]>) {
    let term = |idx: usize| sign * g[idx] * other.map_or(1.0, |o| o[idx]);
    match kind {
        Bcast::Same => buf.iter_mut().enumerate().for_each(|(idx, v)| *v += term(idx)),
        Bcast::Row => (0..g.len()).for_each(|idx| buf[idx % cols] += term(idx)),
        Bcast::Scalar => buf[0] += (0..g.len()).map(term).sum::<f64>(),
    }
}
