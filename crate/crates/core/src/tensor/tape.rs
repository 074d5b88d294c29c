use std::sync::Arc;

use super::dense::matrix_dims;
use super::{
    matmul_into, matmul_nt_into, matmul_tn_into, Activation, Float, Mask, Tensor, TensorError,
};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, Float),
    AddBias(Var, Var),
    Activation(Var, Activation),
    MaskedSoftmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<Float>,
        inv_std: Vec<Float>,
    },
    Mse(Var, Var),
    Sum(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Arc<Tensor>,
    grad: Option<Vec<Float>>,
    requires_grad: bool,
    op: Op,
}

/// Ordered record of executed operations.
///
/// Nodes are appended as operations run, so every node's inputs precede it
/// and a reverse sweep is a valid topological traversal.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.leaf_shared(Arc::new(value), requires_grad)
    }

    /// Registers a leaf without copying its buffer.
    pub fn leaf_shared(&mut self, value: Arc<Tensor>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient accumulated on `v` by the last backward pass.
    pub fn grad(&self, v: Var) -> Option<&[Float]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn grad_tensor(&self, v: Var) -> Option<Tensor> {
        let g = self.grad(v)?;
        Tensor::new(self.shape(v).to_vec(), g.to_vec()).ok()
    }

    /// Clears all gradients so `backward` may run again.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_done = false;
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, inputs: &[Var], op: Op) -> Result<Var, TensorError> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Arc::new(value),
            grad: None,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = matrix_dims(self.value(a))?;
        let (k2, n) = matrix_dims(self.value(b))?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let t = Tensor::new(vec![m, n], out)?;
        self.push("matmul", t, &[a, b], Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.value(a).transpose()?;
        self.push("transpose", t, &[a], Op::Transpose(a))
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(Float, Float) -> Float) -> Result<Tensor, TensorError> {
        self.same_shape(name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let t = self.zip_with("add", a, b, |x, y| x + y)?;
        self.push("add", t, &[a, b], Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let t = self.zip_with("sub", a, b, |x, y| x - y)?;
        self.push("sub", t, &[a, b], Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let t = self.zip_with("mul", a, b, |x, y| x * y)?;
        self.push("mul", t, &[a, b], Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: Float) -> Result<Var, TensorError> {
        let t = self.value(a).map(|x| x * c);
        self.push("scale", t, &[a], Op::Scale(a, c))
    }

    /// Adds a length-`n` bias to every row of an `m×n` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let n = self.value(x).cols();
        if self.value(bias).len() != n {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                left: self.shape(x).to_vec(),
                right: self.shape(bias).to_vec(),
            });
        }
        let b = self.value(bias).data();
        let mut t = self.value(x).clone();
        for row in t.data_mut().chunks_mut(n) {
            for (v, bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
        self.push("add_bias", t, &[x, bias], Op::AddBias(x, bias))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var, TensorError> {
        let t = self.value(x).map(|v| kind.apply(v));
        self.push(kind.name(), t, &[x], Op::Activation(x, kind))
    }

    /// Row-wise softmax over the entries `mask` keeps; masked entries get
    /// weight exactly zero.
    pub fn masked_softmax(&mut self, scores: Var, mask: &Mask) -> Result<Var, TensorError> {
        let x = self.value(scores);
        let (m, n) = matrix_dims(x)?;
        if mask.rows() != m || mask.cols() != n {
            return Err(TensorError::ShapeMismatch {
                op: "masked_softmax",
                left: vec![m, n],
                right: vec![mask.rows(), mask.cols()],
            });
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = x.row(i);
            let keep = mask.row(i);
            let max = row
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .fold(Float::NEG_INFINITY, Float::max);
            if max == Float::NEG_INFINITY {
                return Err(TensorError::FullyMasked { row: i });
            }
            let orow = &mut out[i * n..(i + 1) * n];
            let mut sum = 0.0;
            for j in 0..n {
                if keep[j] {
                    let e = (row[j] - max).exp();
                    orow[j] = e;
                    sum += e;
                }
            }
            for v in orow.iter_mut() {
                *v /= sum;
            }
        }
        let t = Tensor::new(vec![m, n], out)?;
        self.push("masked_softmax", t, &[scores], Op::MaskedSoftmax(scores))
    }

    /// Normalizes each row over the last axis, then applies `gamma`/`beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: Float) -> Result<Var, TensorError> {
        let d = self.value(x).cols();
        if d == 0 {
            return Err(TensorError::Invalid("layer_norm over empty axis".into()));
        }
        for p in [gamma, beta] {
            if self.value(p).len() != d {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    left: self.shape(x).to_vec(),
                    right: self.shape(p).to_vec(),
                });
            }
        }
        let xv = self.value(x);
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let rows = xv.rows();
        let mut xhat = vec![0.0; rows * d];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; rows * d];
        let inv_d = 1.0 / d as Float;
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<Float>() * inv_d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<Float>() * inv_d;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = g[j] * h + b[j];
            }
        }
        let t = Tensor::new(xv.shape().to_vec(), out)?;
        self.push(
            "layer_norm",
            t,
            &[x, gamma, beta],
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Mean squared error as a one-element tensor.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, TensorError> {
        self.same_shape("mse", pred, target)?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let n = p.len() as Float;
        let s = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<Float>() / n;
        self.push("mse", Tensor::scalar(s), &[pred, target], Op::Mse(pred, target))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(s), &[x], Op::Sum(x))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var, TensorError> {
        let (m, n) = matrix_dims(self.value(x))?;
        if width == 0 || start + width > n {
            return Err(TensorError::Invalid(format!(
                "column slice {start}..{} out of range for {n} columns",
                start + width
            )));
        }
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(m * width);
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + start + width]);
        }
        let t = Tensor::new(vec![m, width], out)?;
        self.push("slice_cols", t, &[x], Op::SliceCols { x, start })
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, count: usize) -> Result<Var, TensorError> {
        let (m, n) = matrix_dims(self.value(x))?;
        if count == 0 || start + count > m {
            return Err(TensorError::Invalid(format!(
                "row slice {start}..{} out of range for {m} rows",
                start + count
            )));
        }
        let out = self.value(x).data()[start * n..(start + count) * n].to_vec();
        let t = Tensor::new(vec![count, n], out)?;
        self.push("slice_rows", t, &[x], Op::SliceRows { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts
            .first()
            .ok_or_else(|| TensorError::Invalid("concat of zero tensors".into()))?;
        let (m, _) = matrix_dims(self.value(first))?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = matrix_dims(self.value(p))?;
            if r != m {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.shape(first).to_vec(),
                    right: self.shape(p).to_vec(),
                });
            }
            widths.push(c);
        }
        let n: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let t = Tensor::new(vec![m, n], out)?;
        self.push("concat_cols", t, parts, Op::ConcatCols(parts.to_vec()))
    }

    /// Reverse sweep from a scalar `loss`, populating gradients on every node
    /// that requires one. Gradients from multiple uses of a value add up.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if !self.value(loss).is_scalar() {
            return Err(TensorError::NotScalar(self.shape(loss).to_vec()));
        }
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        self.backward_done = true;
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[idx].grad.take() else {
                continue;
            };
            let contributions = self.local_grads(idx, &g);
            self.nodes[idx].grad = Some(g);
            for (v, dv) in contributions {
                let node = &mut self.nodes[v.0];
                match &mut node.grad {
                    Some(acc) => {
                        for (a, d) in acc.iter_mut().zip(&dv) {
                            *a += d;
                        }
                    }
                    None => node.grad = Some(dv),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, idx: usize, g: &[Float]) -> Vec<(Var, Vec<Float>)> {
        let node = &self.nodes[idx];
        let mut out = Vec::new();
        let mut emit = |v: Var, f: &dyn Fn() -> Vec<Float>| {
            if self.nodes[v.0].requires_grad {
                out.push((v, f()));
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.shape()[1];
                emit(*a, &|| {
                    let mut d = vec![0.0; m * k];
                    matmul_nt_into(g, tb.data(), &mut d, m, n, k);
                    d
                });
                emit(*b, &|| {
                    let mut d = vec![0.0; k * n];
                    matmul_tn_into(ta.data(), g, &mut d, m, k, n);
                    d
                });
            }
            Op::Transpose(a) => {
                let shape = node.value.shape().to_vec();
                emit(*a, &|| {
                    Tensor::new(shape.clone(), g.to_vec())
                        .and_then(|t| t.transpose())
                        .expect("transpose of gradient")
                        .into_data()
                });
            }
            Op::Add(a, b) => {
                emit(*a, &|| g.to_vec());
                emit(*b, &|| g.to_vec());
            }
            Op::Sub(a, b) => {
                emit(*a, &|| g.to_vec());
                emit(*b, &|| g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                emit(*a, &|| g.iter().zip(tb).map(|(d, y)| d * y).collect());
                emit(*b, &|| g.iter().zip(ta).map(|(d, x)| d * x).collect());
            }
            Op::Scale(a, c) => emit(*a, &|| g.iter().map(|d| d * c).collect()),
            Op::AddBias(x, b) => {
                emit(*x, &|| g.to_vec());
                let n = self.value(*b).len();
                emit(*b, &|| {
                    let mut d = vec![0.0; n];
                    for row in g.chunks(n) {
                        for (acc, v) in d.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    d
                });
            }
            Op::Activation(x, kind) => {
                let (xs, ys) = (self.value(*x).data(), node.value.data());
                emit(*x, &|| {
                    g.iter()
                        .zip(xs.iter().zip(ys))
                        .map(|(d, (&xv, &yv))| d * kind.derivative(xv, yv))
                        .collect()
                });
            }
            Op::MaskedSoftmax(x) => {
                let y = &node.value;
                let n = y.cols();
                emit(*x, &|| {
                    let mut d = vec![0.0; y.len()];
                    for (i, (yrow, grow)) in y.data().chunks(n).zip(g.chunks(n)).enumerate() {
                        let dot: Float = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            // Masked entries carry y == 0 and stay exactly zero.
                            if yrow[j] != 0.0 {
                                d[i * n + j] = yrow[j] * (grow[j] - dot);
                            }
                        }
                    }
                    d
                });
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gam = self.value(*gamma).data();
                let d = gam.len();
                emit(*x, &|| {
                    let mut dx = vec![0.0; xhat.len()];
                    let inv_d = 1.0 / d as Float;
                    for (r, is) in inv_std.iter().enumerate() {
                        let gr = &g[r * d..(r + 1) * d];
                        let hr = &xhat[r * d..(r + 1) * d];
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for j in 0..d {
                            let dh = gr[j] * gam[j];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[j];
                        }
                        for j in 0..d {
                            let dh = gr[j] * gam[j];
                            dx[r * d + j] = is * (dh - inv_d * sum_dh - hr[j] * inv_d * sum_dh_h);
                        }
                    }
                    dx
                });
                emit(*gamma, &|| {
                    let mut dg = vec![0.0; d];
                    for (grow, hrow) in g.chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            dg[j] += grow[j] * hrow[j];
                        }
                    }
                    dg
                });
                emit(*beta, &|| {
                    let mut db = vec![0.0; d];
                    for grow in g.chunks(d) {
                        for j in 0..d {
                            db[j] += grow[j];
                        }
                    }
                    db
                });
            }
            Op::Mse(p, t) => {
                let (pv, tv) = (self.value(*p).data(), self.value(*t).data());
                let scale = 2.0 * g[0] / pv.len() as Float;
                emit(*p, &|| pv.iter().zip(tv).map(|(a, b)| scale * (a - b)).collect());
                emit(*t, &|| pv.iter().zip(tv).map(|(a, b)| -scale * (a - b)).collect());
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                emit(*x, &|| vec![g[0]; n]);
            }
            Op::SliceCols { x, start } => {
                let (m, n) = (self.value(*x).rows(), self.value(*x).cols());
                let w = node.value.cols();
                emit(*x, &|| {
                    let mut d = vec![0.0; m * n];
                    for i in 0..m {
                        d[i * n + start..i * n + start + w].copy_from_slice(&g[i * w..(i + 1) * w]);
                    }
                    d
                });
            }
            Op::SliceRows { x, start } => {
                let total = self.value(*x).len();
                let n = node.value.cols();
                emit(*x, &|| {
                    let mut d = vec![0.0; total];
                    d[start * n..start * n + g.len()].copy_from_slice(g);
                    d
                });
            }
            Op::ConcatCols(parts) => {
                let m = node.value.rows();
                let n = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let off = offset;
                    emit(p, &|| {
                        let mut d = Vec::with_capacity(m * w);
                        for i in 0..m {
                            d.extend_from_slice(&g[i * n + off..i * n + off + w]);
                        }
                        d
                    });
                    offset += w;
                }
            }
        }
        out
    }
}
