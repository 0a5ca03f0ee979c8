//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every operation eagerly; [`Graph::backward`] walks the
//! tape in reverse and returns gradients for the parameters used.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::nn::params::{Grads, ParamId, ParamSet};
use crate::nn::tensor::{gemm, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Geometry of a batched 2D convolution. Inputs are laid out as
/// `channels x (batch * height * width)`, one contiguous block per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    fn patch(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    // Visit (patch row, output column, input column) triples of the im2col matrix.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (ho, wo) = (self.out_height(), self.out_width());
        let (h, w) = (self.height, self.width);
        for b in 0..self.batch {
            for oy in 0..ho {
                for ox in 0..wo {
                    let col = b * ho * wo + oy * wo + ox;
                    for c in 0..self.in_channels {
                        for ky in 0..self.kernel {
                            let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..self.kernel {
                                let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let row = (c * self.kernel + ky) * self.kernel + kx;
                                f(row, col, b * h * w + iy as usize * w + ix as usize);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    AddCol(Var, Var),
    Mul(Var, Var),
    ScaleRows(Var, Vec<f64>),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Transpose(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Tensor, inv_std: Vec<f64> },
    MeanGroups(Var, usize),
    RepeatRows(Var, usize),
    TileRows(Var, usize),
    Conv2d { x: Var, w: Var, shape: ConvShape, cols: Tensor },
    PoolBlocks(Var, usize),
    CrossEntropy { logits: Var, targets: Vec<Vec<usize>>, classes: usize, probs: Tensor },
    WeightedSum(Var, Tensor),
}

struct Node {
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value: Some(value), op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: Some(t), op: Op::Input, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { value: None, op: Op::Param(id), needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b), &[a, b])
    }

    /// Add a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows(), 1);
        assert_eq!(r.cols(), self.value(a).cols());
        let r = r.data().to_vec();
        let mut out = self.value(a).clone();
        for i in 0..out.rows() {
            for (x, b) in out.row_mut(i).iter_mut().zip(&r) {
                *x += b;
            }
        }
        self.push(out, Op::AddRow(a, row), &[a, row])
    }

    /// Add a `rows x 1` column to every column of `a`.
    pub fn add_col(&mut self, a: Var, col: Var) -> Var {
        let c = self.value(col);
        assert_eq!(c.cols(), 1);
        assert_eq!(c.rows(), self.value(a).rows());
        let c = c.data().to_vec();
        let mut out = self.value(a).clone();
        for (i, b) in c.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|x| *x += b);
        }
        self.push(out, Op::AddCol(a, col), &[a, col])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape());
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::from_vec(x.rows(), x.cols(), data);
        self.push(out, Op::Mul(a, b), &[a, b])
    }

    /// Multiply row `i` of `a` by the constant `s[i]`.
    pub fn scale_rows(&mut self, a: Var, s: Vec<f64>) -> Var {
        let mut out = self.value(a).clone();
        assert_eq!(s.len(), out.rows());
        for (i, f) in s.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|x| *x *= f);
        }
        self.push(out, Op::ScaleRows(a, s), &[a])
    }

    /// Elementwise product with a constant tensor (dropout masks).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Var {
        let x = self.value(a);
        assert_eq!(x.shape(), c.shape());
        let data = x.data().iter().zip(c.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::from_vec(x.rows(), x.cols(), data);
        self.push(out, Op::MulConst(a, c), &[a])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for p in parts {
                let t = self.value(*p);
                assert_eq!(t.rows(), rows, "concat_cols row mismatch");
                out.row_mut(r)[off..off + t.cols()].copy_from_slice(t.row(r));
                off += t.cols();
            }
        }
        self.push(out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let t = self.value(*p);
            assert_eq!(t.cols(), cols, "concat_rows column mismatch");
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        self.push(Tensor::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        let c = t.cols();
        let out = Tensor::from_vec(len, c, t.data()[start * c..(start + len) * c].to_vec());
        self.push(out, Op::SliceRows(a, start), &[a])
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        let mut out = Tensor::zeros(t.rows(), len);
        for r in 0..t.rows() {
            out.row_mut(r).copy_from_slice(&t.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_mut(r));
        }
        self.push(out, Op::SoftmaxRows(a), &[a])
    }

    /// Per-row layer normalization with learned `1 x cols` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let t = self.value(x);
        let (rows, cols) = t.shape();
        let mut xhat = Tensor::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = t.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (o, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
        }
        let (g, b) = (self.value(gamma).data().to_vec(), self.value(beta).data().to_vec());
        let mut out = xhat.clone();
        for r in 0..rows {
            for (c, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = *o * g[c] + b[c];
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std }, &[x, gamma, beta])
    }

    /// Mean over consecutive groups of `group` rows.
    pub fn mean_groups(&mut self, a: Var, group: usize) -> Var {
        let t = self.value(a);
        assert!(group > 0 && t.rows() % group == 0);
        let n = t.rows() / group;
        let mut out = Tensor::zeros(n, t.cols());
        for r in 0..t.rows() {
            let dst = out.row_mut(r / group);
            for (o, v) in dst.iter_mut().zip(t.row(r)) {
                *o += v;
            }
        }
        out.scale_assign(1.0 / group as f64);
        self.push(out, Op::MeanGroups(a, group), &[a])
    }

    /// Repeat each row `times` times consecutively.
    pub fn repeat_rows(&mut self, a: Var, times: usize) -> Var {
        let t = self.value(a);
        let mut data = Vec::with_capacity(t.len() * times);
        for r in 0..t.rows() {
            for _ in 0..times {
                data.extend_from_slice(t.row(r));
            }
        }
        let out = Tensor::from_vec(t.rows() * times, t.cols(), data);
        self.push(out, Op::RepeatRows(a, times), &[a])
    }

    /// Stack `times` copies of the whole tensor.
    pub fn tile_rows(&mut self, a: Var, times: usize) -> Var {
        let t = self.value(a);
        let data = t.data().repeat(times);
        let out = Tensor::from_vec(t.rows() * times, t.cols(), data);
        self.push(out, Op::TileRows(a, times), &[a])
    }

    /// Batched 2D convolution without bias. `w` is
    /// `out_channels x (in_channels * k * k)`.
    pub fn conv2d(&mut self, x: Var, w: Var, shape: ConvShape) -> Var {
        let input = self.value(x);
        assert_eq!(input.shape(), (shape.in_channels, shape.batch * shape.height * shape.width));
        assert_eq!(self.value(w).cols(), shape.patch());
        let ncols = shape.batch * shape.out_height() * shape.out_width();
        let mut cols = Tensor::zeros(shape.patch(), ncols);
        let hw = shape.height * shape.width;
        {
            let src = input.data();
            let dst = cols.data_mut();
            shape.for_each_tap(|row, col, at| {
                let c = row / (shape.kernel * shape.kernel);
                dst[row * ncols + col] = src[c * shape.batch * hw + at];
            });
        }
        let out = self.value(w).matmul(&cols);
        self.push(out, Op::Conv2d { x, w, shape, cols }, &[x, w])
    }

    /// Mean over consecutive column blocks: `c x (n * size)` becomes `n x c`.
    pub fn pool_blocks(&mut self, a: Var, size: usize) -> Var {
        let t = self.value(a);
        assert!(size > 0 && t.cols() % size == 0);
        let n = t.cols() / size;
        let mut out = Tensor::zeros(n, t.rows());
        for c in 0..t.rows() {
            let row = t.row(c);
            for b in 0..n {
                out.set(b, c, row[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64);
            }
        }
        self.push(out, Op::PoolBlocks(a, size), &[a])
    }

    /// Mean over rows of the summed per-head softmax cross-entropy. Row `i`
    /// of `logits` holds `targets[i].len()` heads of `classes` logits each.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Vec<usize>], classes: usize) -> Var {
        let t = self.value(logits);
        assert_eq!(t.rows(), targets.len());
        let mut probs = t.clone();
        let mut loss = 0.0;
        for (r, tg) in targets.iter().enumerate() {
            assert_eq!(tg.len() * classes, t.cols());
            let row = probs.row_mut(r);
            for (h, &y) in tg.iter().enumerate() {
                let seg = &mut row[h * classes..(h + 1) * classes];
                let m = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + seg.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                loss += lse - seg[y];
                seg.iter_mut().for_each(|v| *v = (*v - lse).exp());
            }
        }
        let n = targets.len().max(1) as f64;
        self.push(
            Tensor::scalar(loss / n),
            Op::CrossEntropy { logits, targets: targets.to_vec(), classes, probs },
            &[logits],
        )
    }

    /// `sum(a * w)` for a constant `w`; used to project outputs to a scalar.
    pub fn weighted_sum(&mut self, a: Var, w: Tensor) -> Var {
        let s = self.value(a).data().iter().zip(w.data()).map(|(x, y)| x * y).sum();
        self.push(Tensor::scalar(s), Op::WeightedSum(a, w), &[a])
    }

    /// Hash of the sign pattern of every ReLU input. Finite differences are
    /// only meaningful when it does not change across the perturbation.
    pub fn relu_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            if let Op::Relu(a) = node.op {
                for x in self.value(a).data() {
                    (*x > 0.0).hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.value(loss).shape(), (1, 1), "backward needs a scalar loss");
        let mut grads = self.params.zero_grads();
        let mut g: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        g[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(gi) = g[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let mut acc = |v: Var, t: Tensor| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut g[v.0] {
                    Some(e) => e.add_assign(&t),
                    slot => *slot = Some(t),
                }
            };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => grads.get_mut(*id).add_assign(&gi),
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if self.nodes[a.0].needs_grad {
                        let mut da = Tensor::zeros(va.rows(), va.cols());
                        gemm(1.0, &gi, false, vb, true, 0.0, &mut da);
                        acc(*a, da);
                    }
                    if self.nodes[b.0].needs_grad {
                        let mut db = Tensor::zeros(vb.rows(), vb.cols());
                        gemm(1.0, va, true, &gi, false, 0.0, &mut db);
                        acc(*b, db);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, gi.clone());
                    acc(*b, gi);
                }
                Op::AddRow(a, r) => {
                    let mut dr = Tensor::zeros(1, gi.cols());
                    for k in 0..gi.rows() {
                        for (d, x) in dr.data_mut().iter_mut().zip(gi.row(k)) {
                            *d += x;
                        }
                    }
                    acc(*r, dr);
                    acc(*a, gi);
                }
                Op::AddCol(a, c) => {
                    let d: Vec<f64> = (0..gi.rows()).map(|k| gi.row(k).iter().sum()).collect();
                    acc(*c, Tensor::from_vec(gi.rows(), 1, d));
                    acc(*a, gi);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let da: Vec<f64> = gi.data().iter().zip(vb.data()).map(|(g, y)| g * y).collect();
                    let db: Vec<f64> = gi.data().iter().zip(va.data()).map(|(g, x)| g * x).collect();
                    acc(*a, Tensor::from_vec(gi.rows(), gi.cols(), da));
                    acc(*b, Tensor::from_vec(gi.rows(), gi.cols(), db));
                }
                Op::ScaleRows(a, s) => {
                    let mut d = gi;
                    for (k, f) in s.iter().enumerate() {
                        d.row_mut(k).iter_mut().for_each(|x| *x *= f);
                    }
                    acc(*a, d);
                }
                Op::MulConst(a, c) => {
                    let d: Vec<f64> = gi.data().iter().zip(c.data()).map(|(g, m)| g * m).collect();
                    acc(*a, Tensor::from_vec(gi.rows(), gi.cols(), d));
                }
                Op::Scale(a, s) => acc(*a, gi.map(|x| x * s)),
                Op::Relu(a) => {
                    let va = self.value(*a);
                    let d: Vec<f64> =
                        gi.data().iter().zip(va.data()).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }).collect();
                    acc(*a, Tensor::from_vec(gi.rows(), gi.cols(), d));
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let mut d = Tensor::zeros(gi.rows(), w);
                        for r in 0..gi.rows() {
                            d.row_mut(r).copy_from_slice(&gi.row(r)[off..off + w]);
                        }
                        off += w;
                        acc(*p, d);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let h = self.value(*p).rows();
                        let c = gi.cols();
                        acc(*p, Tensor::from_vec(h, c, gi.data()[off * c..(off + h) * c].to_vec()));
                        off += h;
                    }
                }
                Op::SliceRows(a, start) => {
                    let va = self.value(*a);
                    let mut d = Tensor::zeros(va.rows(), va.cols());
                    let c = va.cols();
                    d.data_mut()[start * c..start * c + gi.len()].copy_from_slice(gi.data());
                    acc(*a, d);
                }
                Op::SliceCols(a, start) => {
                    let va = self.value(*a);
                    let mut d = Tensor::zeros(va.rows(), va.cols());
                    for r in 0..gi.rows() {
                        d.row_mut(r)[*start..start + gi.cols()].copy_from_slice(gi.row(r));
                    }
                    acc(*a, d);
                }
                Op::Transpose(a) => acc(*a, gi.transpose()),
                Op::SoftmaxRows(a) => {
                    let y = node.value.as_ref().expect("softmax output");
                    let mut d = Tensor::zeros(gi.rows(), gi.cols());
                    for r in 0..gi.rows() {
                        let dot: f64 = gi.row(r).iter().zip(y.row(r)).map(|(g, p)| g * p).sum();
                        for ((o, g), p) in d.row_mut(r).iter_mut().zip(gi.row(r)).zip(y.row(r)) {
                            *o = p * (g - dot);
                        }
                    }
                    acc(*a, d);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let gm = self.value(*gamma).data();
                    let (rows, cols) = gi.shape();
                    let mut dg = Tensor::zeros(1, cols);
                    let mut db = Tensor::zeros(1, cols);
                    let mut dx = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        let (gr, xr) = (gi.row(r), xhat.row(r));
                        for c in 0..cols {
                            dg.data_mut()[c] += gr[c] * xr[c];
                            db.data_mut()[c] += gr[c];
                        }
                        let dxhat: Vec<f64> = (0..cols).map(|c| gr[c] * gm[c]).collect();
                        let mean_d = dxhat.iter().sum::<f64>() / cols as f64;
                        let mean_dx = dxhat.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = inv_std[r] * (dxhat[c] - mean_d - xr[c] * mean_dx);
                        }
                    }
                    acc(*gamma, dg);
                    acc(*beta, db);
                    acc(*x, dx);
                }
                Op::MeanGroups(a, group) => {
                    let va = self.value(*a);
                    let mut d = Tensor::zeros(va.rows(), va.cols());
                    let s = 1.0 / *group as f64;
                    for r in 0..va.rows() {
                        for (o, g) in d.row_mut(r).iter_mut().zip(gi.row(r / group)) {
                            *o = g * s;
                        }
                    }
                    acc(*a, d);
                }
                Op::RepeatRows(a, times) => {
                    let va = self.value(*a);
                    let mut d = Tensor::zeros(va.rows(), va.cols());
                    for r in 0..gi.rows() {
                        for (o, g) in d.row_mut(r / times).iter_mut().zip(gi.row(r)) {
                            *o += g;
                        }
                    }
                    acc(*a, d);
                }
                Op::TileRows(a, times) => {
                    let va = self.value(*a);
                    let mut d = Tensor::zeros(va.rows(), va.cols());
                    let n = va.len();
                    for k in 0..*times {
                        for (o, g) in d.data_mut().iter_mut().zip(&gi.data()[k * n..(k + 1) * n]) {
                            *o += g;
                        }
                    }
                    acc(*a, d);
                }
                Op::Conv2d { x, w, shape, cols } => {
                    let vw = self.value(*w);
                    if self.nodes[w.0].needs_grad {
                        let mut dw = Tensor::zeros(vw.rows(), vw.cols());
                        gemm(1.0, &gi, false, cols, true, 0.0, &mut dw);
                        acc(*w, dw);
                    }
                    if self.nodes[x.0].needs_grad {
                        let mut dcols = Tensor::zeros(cols.rows(), cols.cols());
                        gemm(1.0, vw, true, &gi, false, 0.0, &mut dcols);
                        let vx = self.value(*x);
                        let mut dx = Tensor::zeros(vx.rows(), vx.cols());
                        let hw = shape.height * shape.width;
                        let ncols = cols.cols();
                        let src = dcols.data();
                        let dst = dx.data_mut();
                        shape.for_each_tap(|row, col, at| {
                            let c = row / (shape.kernel * shape.kernel);
                            dst[c * shape.batch * hw + at] += src[row * ncols + col];
                        });
                        acc(*x, dx);
                    }
                }
                Op::PoolBlocks(a, size) => {
                    let va = self.value(*a);
                    let mut d = Tensor::zeros(va.rows(), va.cols());
                    let s = 1.0 / *size as f64;
                    for c in 0..va.rows() {
                        let row = d.row_mut(c);
                        for (k, o) in row.iter_mut().enumerate() {
                            *o = gi.get(k / size, c) * s;
                        }
                    }
                    acc(*a, d);
                }
                Op::CrossEntropy { logits, targets, classes, probs } => {
                    let scale = gi.item() / targets.len().max(1) as f64;
                    let mut d = probs.clone();
                    for (r, tg) in targets.iter().enumerate() {
                        let row = d.row_mut(r);
                        for (h, &y) in tg.iter().enumerate() {
                            row[h * classes + y] -= 1.0;
                        }
                        row.iter_mut().for_each(|v| *v *= scale);
                    }
                    acc(*logits, d);
                }
                Op::WeightedSum(a, w) => {
                    let s = gi.item();
                    acc(*a, w.map(|x| x * s));
                }
            }
        }
        grads
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{gradient_check, Evaluation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    // Touches every operation once; gradients flow through all of them.
    #[test]
    fn every_op_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut ps = ParamSet::new();
        let a = ps.add("a", random(&mut rng, 4, 6));
        let b = ps.add("b", random(&mut rng, 6, 6));
        let row = ps.add("row", random(&mut rng, 1, 6));
        let col = ps.add("col", random(&mut rng, 4, 1));
        let gamma = ps.add("gamma", random(&mut rng, 1, 6));
        let beta = ps.add("beta", random(&mut rng, 1, 6));
        let kern = ps.add("kern", random(&mut rng, 3, 2 * 9));
        let img = ps.add("img", random(&mut rng, 2, 2 * 25));
        let head = ps.add("head", random(&mut rng, 9, 10));
        let mask = random(&mut rng, 4, 6);
        let shape = ConvShape { batch: 2, in_channels: 2, height: 5, width: 5, kernel: 3, stride: 2, padding: 1 };
        let targets = vec![vec![1, 4], vec![0, 2]];

        let eval = |p: &ParamSet| {
            let mut g = Graph::new(p);
            let (va, vb, vr, vc) = (g.param(a), g.param(b), g.param(row), g.param(col));
            let h = g.matmul(va, vb);
            let h = g.add_row(h, vr);
            let h = g.add_col(h, vc);
            let h2 = g.mul(h, va);
            let h2 = g.mul_const(h2, mask.clone());
            let h = g.add(h, h2);
            let h = g.scale_rows(h, vec![0.5, -1.0, 2.0, 1.5]);
            let (vg, vbt) = (g.param(gamma), g.param(beta));
            let h = g.layer_norm(h, vg, vbt, 1e-5);
            let s = g.softmax_rows(h);
            let s = g.scale(s, 3.0);
            let t = g.transpose(s);
            let t = g.slice_rows(t, 1, 4);
            let t = g.slice_cols(t, 0, 4);
            let t = g.tile_rows(t, 2);
            let t = g.relu(t);
            let m = g.mean_groups(t, 4); // 2 x 4
            let (vk, vi) = (g.param(kern), g.param(img));
            let c = g.conv2d(vi, vk, shape); // 3 x (2*9)
            let c = g.relu(c);
            let pooled = g.pool_blocks(c, 9); // 2 x 3
            let rep = g.repeat_rows(pooled, 1);
            let hl = g.slice_rows(h, 0, 2);
            let hl = g.slice_cols(hl, 0, 2);
            let feat = g.concat_cols(&[m, rep, hl]); // 2 x 9
            let both = g.concat_rows(&[feat]);
            let vh = g.param(head);
            let logits = g.matmul(both, vh);
            let loss = g.cross_entropy(logits, &targets, 5);
            Evaluation { loss: g.value(loss).item(), grads: g.backward(loss), signature: g.relu_signature() }
        };
        let r = gradient_check(&ps, eval, 150, 1e-5, &mut rng);
        assert!(r.checked >= 100, "{r:?}");
        assert!(r.max_relative_error < 1e-5, "{r:?}");
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.input(Tensor::from_vec(2, 3, vec![1000.0, 1.0, -3.0, 0.0, 0.0, 0.0]));
        let s = g.softmax_rows(x);
        for r in 0..2 {
            assert!((g.value(s).row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.input(Tensor::zeros(2, 15));
        let l = g.cross_entropy(x, &[vec![0, 1, 2], vec![4, 4, 4]], 5);
        assert!((g.value(l).item() - 3.0 * 5f64.ln()).abs() < 1e-12);
    }
}
