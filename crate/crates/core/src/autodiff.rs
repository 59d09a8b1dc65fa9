//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters enter the
//! tape through [`Tape::param`] or [`Tape::gather_rows`]; calling
//! [`Tape::backward`] on a `1 × 1` output walks the tape in reverse and returns
//! the gradient of every parameter that was touched.
//!
//! The op set is exactly what the recommender needs: affine maps, pointwise
//! non-linearities, concatenation/slicing, row-wise layer norm, masked softmax
//! and the GATv2 pairwise scoring kernel.

use alloc::vec;
use alloc::vec::Vec;

use crate::params::{ParamId, ParamStore};
use crate::tensor::{sigmoid, Matrix};

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Param(ParamId),
    Rows {
        param: ParamId,
        rows: Vec<Option<usize>>,
    },
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Square(Var),
    Sum(Var),
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    Gatv2Scores {
        target: Var,
        source: Var,
        att: Var,
        slope: f64,
    },
    MaskedSoftmax(Var),
}

struct Node {
    value: Matrix,
    op: Op,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

/// Gradients of a scalar output with respect to each parameter tensor.
/// `None` means the parameter did not take part in the forward pass.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamStore) -> Self {
        Gradients {
            grads: vec![None; params.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads[id.index()].as_ref()
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Dense gradient, zero-filled when the parameter was unused.
    pub fn dense(&self, id: ParamId, params: &ParamStore) -> Matrix {
        match &self.grads[id.index()] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = params.get(id).shape();
                Matrix::zeros(r, c)
            }
        }
    }

    fn accumulate(&mut self, id: ParamId, shape: (usize, usize), f: impl FnOnce(&mut Matrix)) {
        let slot = &mut self.grads[id.index()];
        let g = slot.get_or_insert_with(|| Matrix::zeros(shape.0, shape.1));
        f(g);
    }

    /// `self += other`, in parameter order.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => m.add_assign(t),
                    None => *mine = Some(t.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.scale_assign(factor);
        }
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.grads
            .iter()
            .position(|g| g.as_ref().is_some_and(|m| !m.is_finite()))
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(256),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A whole parameter tensor. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        let value = self.params.get(id).clone();
        let v = self.push(value, Op::Param(id));
        self.param_vars[id.index()] = Some(v);
        v
    }

    /// Selected rows of a parameter table; `None` yields a zero row that
    /// receives no gradient.
    pub fn gather_rows(&mut self, id: ParamId, rows: &[Option<usize>]) -> Var {
        let table = self.params.get(id);
        let cols = table.cols();
        let mut value = Matrix::zeros(rows.len(), cols);
        for (r, src) in rows.iter().enumerate() {
            if let Some(s) = src {
                value.row_mut(r).copy_from_slice(table.row(*s));
            }
        }
        self.push(
            value,
            Op::Rows {
                param: id,
                rows: rows.to_vec(),
            },
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul_t(self.value(b));
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a, b))
    }

    /// Adds the `1 × n` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows(), 1, "add_row expects a row vector");
        assert_eq!(bias.cols(), self.value(a).cols(), "add_row width mismatch");
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            for (v, &bv) in value.row_mut(r).iter_mut().zip(bias.data()) {
                *v += bv;
            }
        }
        self.push(value, Op::AddRow(a, b))
    }

    /// `a · W + b` for a row-batch `a`.
    pub fn affine(&mut self, a: Var, w: Var, b: Var) -> Var {
        let h = self.matmul(a, w);
        self.add_row(h, b)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        self.push(value, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(value, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| leaky(x, slope));
        self.push(value, Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        self.push(value, Op::Square(a))
    }

    /// Sum of all entries as a `1 × 1` value.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Matrix::scalar(s), Op::Sum(a))
    }

    /// Column means, `m × n → 1 × n`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let rows = m.rows();
        let mut out = Matrix::zeros(1, m.cols());
        for r in 0..rows {
            for (o, &v) in out.data_mut().iter_mut().zip(m.row(r)) {
                *o += v;
            }
        }
        out.scale_assign(1.0 / rows as f64);
        self.push(out, Op::MeanRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.rows(), rows, "concat_cols row mismatch");
            for r in 0..rows {
                out.row_mut(r)[offset..offset + m.cols()].copy_from_slice(m.row(r));
            }
            offset += m.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.cols(), cols, "concat_rows column mismatch");
            data.extend_from_slice(m.data());
            rows += m.rows();
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        let cols = m.cols();
        let data = m.data()[start * cols..(start + len) * cols].to_vec();
        self.push(Matrix::from_vec(len, cols, data), Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        let mut out = Matrix::zeros(m.rows(), len);
        for r in 0..m.rows() {
            out.row_mut(r).copy_from_slice(&m.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    /// Row-wise layer normalisation with `1 × n` gain and offset.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xm = self.value(x);
        let (rows, cols) = xm.shape();
        let g = self.value(gain);
        let b = self.value(bias);
        let mut xhat = Matrix::zeros(rows, cols);
        let mut out = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xm.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
            inv_std.push(inv);
            for c in 0..cols {
                let h = (row[c] - mean) * inv;
                xhat[(r, c)] = h;
                out[(r, c)] = h * g.data()[c] + b.data()[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    /// GATv2 pairwise logits: `out[i][j] = Σ_c att_c · LeakyReLU(target[i,c] + source[j,c])`,
    /// an `m × n` matrix for `m` targets and `n` sources.
    pub fn gatv2_scores(&mut self, target: Var, source: Var, att: Var, slope: f64) -> Var {
        let t = self.value(target);
        let s = self.value(source);
        let a = self.value(att);
        let m = t.rows();
        let n = s.rows();
        let width = t.cols();
        assert_eq!(s.cols(), width, "gatv2 source width");
        assert_eq!(a.shape(), (1, width), "gatv2 attention vector shape");
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let ti = t.row(i);
            for j in 0..n {
                let sj = s.row(j);
                let mut acc = 0.0;
                for c in 0..width {
                    acc += a.data()[c] * leaky(ti[c] + sj[c], slope);
                }
                out[(i, j)] = acc;
            }
        }
        self.push(
            out,
            Op::Gatv2Scores {
                target,
                source,
                att,
                slope,
            },
        )
    }

    /// Row-wise softmax over the columns whose `mask` entry is true; masked
    /// columns get exactly zero weight. A row with no valid column is all zero.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Var {
        let m = self.value(x);
        assert_eq!(m.cols(), mask.len(), "softmax mask width");
        let out = masked_softmax_rows(m, mask);
        self.push(out, Op::MaskedSoftmax(x))
    }

    /// Reverse sweep from the scalar `output`.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Matrix::scalar(1.0));
        let mut out = Gradients::zeros_like(self.params);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.accumulate(*id, g.shape(), |acc| acc.add_assign(&g));
                }
                Op::Rows { param, rows } => {
                    let shape = self.params.get(*param).shape();
                    out.accumulate(*param, shape, |acc| {
                        for (r, src) in rows.iter().enumerate() {
                            if let Some(s) = src {
                                for (a, &v) in acc.row_mut(*s).iter_mut().zip(g.row(r)) {
                                    *a += v;
                                }
                            }
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b));
                    let db = self.value(*a).t_matmul(&g);
                    push_grad(&mut grads, *a, da);
                    push_grad(&mut grads, *b, db);
                }
                Op::MatMulT(a, b) => {
                    let da = g.matmul(self.value(*b));
                    let db = g.t_matmul(self.value(*a));
                    push_grad(&mut grads, *a, da);
                    push_grad(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    push_grad(&mut grads, *b, g.clone());
                    push_grad(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    push_grad(&mut grads, *b, g.map(|v| -v));
                    push_grad(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.value(*b), |x, y| x * y);
                    let db = g.zip_map(self.value(*a), |x, y| x * y);
                    push_grad(&mut grads, *a, da);
                    push_grad(&mut grads, *b, db);
                }
                Op::AddRow(a, b) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, &v) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                    push_grad(&mut grads, *b, db);
                    push_grad(&mut grads, *a, g);
                }
                Op::Scale(a, f) => {
                    let f = *f;
                    push_grad(&mut grads, *a, g.map(|v| v * f));
                }
                Op::AddScalar(a) => push_grad(&mut grads, *a, g),
                Op::Relu(a) => {
                    let d = g.zip_map(self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                    push_grad(&mut grads, *a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let slope = *slope;
                    let d = g.zip_map(self.value(*a), |gv, x| gv * leaky_grad(x, slope));
                    push_grad(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y));
                    push_grad(&mut grads, *a, d);
                }
                Op::Square(a) => {
                    let d = g.zip_map(self.value(*a), |gv, x| 2.0 * x * gv);
                    push_grad(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    push_grad(&mut grads, *a, Matrix::filled(r, c, g.item()));
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.value(*a).shape();
                    let mut d = Matrix::zeros(r, c);
                    let inv = 1.0 / r as f64;
                    for row in 0..r {
                        for (dv, &gv) in d.row_mut(row).iter_mut().zip(g.data()) {
                            *dv = gv * inv;
                        }
                    }
                    push_grad(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let (r, c) = self.value(*p).shape();
                        let mut d = Matrix::zeros(r, c);
                        for row in 0..r {
                            d.row_mut(row).copy_from_slice(&g.row(row)[offset..offset + c]);
                        }
                        offset += c;
                        push_grad(&mut grads, *p, d);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let (r, c) = self.value(*p).shape();
                        let d = Matrix::from_vec(
                            r,
                            c,
                            g.data()[offset * c..(offset + r) * c].to_vec(),
                        );
                        offset += r;
                        push_grad(&mut grads, *p, d);
                    }
                }
                Op::SliceRows(a, start) => {
                    let (r, c) = self.value(*a).shape();
                    let mut d = Matrix::zeros(r, c);
                    d.data_mut()[start * c..(start + g.rows()) * c].copy_from_slice(g.data());
                    push_grad(&mut grads, *a, d);
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = self.value(*a).shape();
                    let mut d = Matrix::zeros(r, c);
                    for row in 0..r {
                        d.row_mut(row)[*start..*start + g.cols()].copy_from_slice(g.row(row));
                    }
                    push_grad(&mut grads, *a, d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let (rows, cols) = xhat.shape();
                    let gv = self.value(*gain);
                    let mut dgain = Matrix::zeros(1, cols);
                    let mut dbias = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(rows, cols);
                    let n = cols as f64;
                    for r in 0..rows {
                        let gr = g.row(r);
                        let hr = xhat.row(r);
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for c in 0..cols {
                            dgain.data_mut()[c] += gr[c] * hr[c];
                            dbias.data_mut()[c] += gr[c];
                            let dh = gr[c] * gv.data()[c];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[c];
                        }
                        let inv = inv_std[r];
                        for c in 0..cols {
                            let dh = gr[c] * gv.data()[c];
                            dx[(r, c)] = inv / n * (n * dh - sum_dh - hr[c] * sum_dh_h);
                        }
                    }
                    push_grad(&mut grads, *gain, dgain);
                    push_grad(&mut grads, *bias, dbias);
                    push_grad(&mut grads, *x, dx);
                }
                Op::Gatv2Scores {
                    target,
                    source,
                    att,
                    slope,
                } => {
                    let t = self.value(*target);
                    let s = self.value(*source);
                    let a = self.value(*att);
                    let (m, width) = t.shape();
                    let n = s.rows();
                    let mut dt = Matrix::zeros(m, width);
                    let mut ds = Matrix::zeros(n, width);
                    let mut da = Matrix::zeros(1, width);
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[(i, j)];
                            if gij == 0.0 {
                                continue;
                            }
                            for c in 0..width {
                                let z = t[(i, c)] + s[(j, c)];
                                da.data_mut()[c] += gij * leaky(z, *slope);
                                let dz = gij * a.data()[c] * leaky_grad(z, *slope);
                                dt[(i, c)] += dz;
                                ds[(j, c)] += dz;
                            }
                        }
                    }
                    push_grad(&mut grads, *att, da);
                    push_grad(&mut grads, *source, ds);
                    push_grad(&mut grads, *target, dt);
                }
                Op::MaskedSoftmax(a) => {
                    let y = &node.value;
                    let (rows, cols) = y.shape();
                    let mut d = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..cols {
                            d[(r, c)] = yr[c] * (gr[c] - inner);
                        }
                    }
                    push_grad(&mut grads, *a, d);
                }
            }
        }
        out
    }
}

fn push_grad(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[inline]
pub fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Row-wise masked softmax on plain matrices; shared by the tape op and callers
/// that only need weights.
pub fn masked_softmax_rows(m: &Matrix, mask: &[bool]) -> Matrix {
    let (rows, cols) = m.shape();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let row = m.row(r);
        let max = row
            .iter()
            .zip(mask)
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            continue;
        }
        let mut total = 0.0;
        for c in 0..cols {
            if mask[c] {
                let e = libm::exp(row[c] - max);
                out[(r, c)] = e;
                total += e;
            }
        }
        for c in 0..cols {
            out[(r, c)] /= total;
        }
    }
    out
}
