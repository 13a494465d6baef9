//! Closed-world reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive as it runs, so node ids are already in
//! topological order. [`Tape::backward`] walks the nodes in exact reverse
//! order and accumulates vector-Jacobian products. Only the primitives the
//! model needs exist; there is no general expression graph.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hin::SparseAdj;
use crate::numerics::{init, kernels, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A sparse left operand together with its transpose for the backward pass.
#[derive(Debug)]
pub struct SparseOperand {
    forward: SparseAdj,
    transpose: SparseAdj,
}

impl SparseOperand {
    pub fn new(a: SparseAdj) -> Self {
        let transpose = a.transpose();
        SparseOperand {
            forward: a,
            transpose,
        }
    }

    pub fn matrix(&self) -> &SparseAdj {
        &self.forward
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseOperand>, Var),
    Elu(Var),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    Sum(Vec<Var>),
    Scale(Var, f64),
    /// Row `i` of `z` times `att[i, col]`.
    ColScale {
        z: Var,
        att: Var,
        col: usize,
    },
    /// Row `i` is `Σ_c att[i, c] · parts[c][i]`.
    WeightedSum {
        parts: Vec<Var>,
        att: Var,
    },
    /// Rows `start..start + len`.
    RowBlock {
        x: Var,
        start: usize,
    },
    Mask(Var, Matrix),
    /// `weight · Σ −ln softmax(logits[r])[label]`; keeps the probabilities.
    CrossEntropy {
        logits: Var,
        rows: Vec<usize>,
        labels: Vec<usize>,
        weight: f64,
        probs: Matrix,
    },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// The gradient of `v`, or zeros of `shape` when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

fn elu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn softmax_row(src: &[f64], dst: &mut [f64]) {
    let max = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (d, &x) in dst.iter_mut().zip(src) {
        *d = (x - max).exp();
        s += *d;
    }
    for d in dst.iter_mut() {
        *d /= s;
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf; no gradient is computed for it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::shape("matmul", sa, sb));
        }
        let value = kernels::matmul(self.value(a), self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn spmm(&mut self, a: &Arc<SparseOperand>, b: Var) -> Result<Var> {
        let sb = self.shape(b);
        if a.forward.n_cols() != sb.0 {
            return Err(Error::shape("spmm", a.forward.shape(), sb));
        }
        let value = kernels::spmm(&a.forward, self.value(b));
        let rg = self.rg(b);
        Ok(self.push(value, Op::SpMM(Arc::clone(a), b), rg))
    }

    pub fn elu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(elu_scalar);
        let rg = self.rg(x);
        self.push(value, Op::Elu(x), rg)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let mut value = Matrix::zeros(src.rows(), src.cols());
        for i in 0..src.rows() {
            softmax_row(src.row(i), value.row_mut(i));
        }
        let rg = self.rg(x);
        self.push(value, Op::SoftmaxRows(x), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::hcat(&mats).map_err(|_| {
            Error::shape(
                "concat_cols",
                mats.first().map_or((0, 0), |m| m.shape()),
                mats.iter()
                    .find(|m| m.rows() != mats[0].rows())
                    .map_or((0, 0), |m| m.shape()),
            )
        })?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Elementwise sum of equally shaped operands.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Model("sum of zero operands".into()))?;
        let mut value = self.value(first).clone();
        for &p in &parts[1..] {
            if self.shape(p) != value.shape() {
                return Err(Error::shape("sum", value.shape(), self.shape(p)));
            }
            value.add_assign(self.value(p));
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::Sum(parts.to_vec()), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.sum(&[a, b])
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let value = self.value(x).scaled(s);
        let rg = self.rg(x);
        self.push(value, Op::Scale(x, s), rg)
    }

    /// Scales row `i` of `z` by `att[i, col]`.
    pub fn col_scale(&mut self, z: Var, att: Var, col: usize) -> Result<Var> {
        let (sz, sa) = (self.shape(z), self.shape(att));
        if sz.0 != sa.0 || col >= sa.1 {
            return Err(Error::shape("col_scale", sz, sa));
        }
        let (zm, am) = (self.value(z), self.value(att));
        let mut value = zm.clone();
        for i in 0..sz.0 {
            let a = am.get(i, col);
            value.row_mut(i).iter_mut().for_each(|x| *x *= a);
        }
        let rg = self.rg(z) || self.rg(att);
        Ok(self.push(value, Op::ColScale { z, att, col }, rg))
    }

    /// `Σ_c att[:, c] ⊙ parts[c]` with one attention column per part.
    pub fn weighted_sum(&mut self, parts: &[Var], att: Var) -> Result<Var> {
        let sa = self.shape(att);
        let first = *parts
            .first()
            .ok_or_else(|| Error::Model("weighted sum of zero operands".into()))?;
        let shape = self.shape(first);
        if sa != (shape.0, parts.len()) {
            return Err(Error::shape(
                "weighted_sum attention",
                sa,
                (shape.0, parts.len()),
            ));
        }
        let mut value = Matrix::zeros(shape.0, shape.1);
        for (c, &p) in parts.iter().enumerate() {
            if self.shape(p) != shape {
                return Err(Error::shape("weighted_sum", shape, self.shape(p)));
            }
            let (pv, av) = (self.value(p), self.value(att));
            for i in 0..shape.0 {
                let a = av.get(i, c);
                value
                    .row_mut(i)
                    .iter_mut()
                    .zip(pv.row(i))
                    .for_each(|(o, &x)| *o += a * x);
            }
        }
        let rg = self.rg(att) || parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            value,
            Op::WeightedSum {
                parts: parts.to_vec(),
                att,
            },
            rg,
        ))
    }

    /// Rows `start..start + len` of `x`.
    pub fn row_block(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if start + len > r {
            return Err(Error::shape("row_block", (r, c), (start + len, c)));
        }
        let src = self.value(x);
        let value = Matrix::from_fn(len, c, |i, j| src.get(start + i, j));
        let rg = self.rg(x);
        Ok(self.push(value, Op::RowBlock { x, start }, rg))
    }

    /// Inverted dropout. Identity in eval mode or at rate 0.
    pub fn dropout<R: rand::Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        init::check_rate(rate)?;
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let (r, c) = self.shape(x);
        let mask = init::dropout_mask(r, c, rate, rng)?;
        Ok(self.apply_mask(x, mask))
    }

    /// Elementwise product with a fixed mask.
    pub fn apply_mask(&mut self, x: Var, mask: Matrix) -> Var {
        assert_eq!(self.shape(x), mask.shape());
        let mut value = self.value(x).clone();
        for (v, m) in value.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *v *= m;
        }
        let rg = self.rg(x);
        self.push(value, Op::Mask(x, mask), rg)
    }

    /// Row-softmax cross-entropy summed over `rows`, times `weight`.
    /// Produces a 1×1 node.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        rows: &[usize],
        labels: &[usize],
        weight: f64,
    ) -> Result<Var> {
        let lm = self.value(logits);
        if rows.len() != labels.len() {
            return Err(Error::shape(
                "cross_entropy",
                (rows.len(), 1),
                (labels.len(), 1),
            ));
        }
        let c = lm.cols();
        let mut probs = Matrix::zeros(rows.len(), c);
        let mut loss = 0.0;
        for (k, (&r, &y)) in rows.iter().zip(labels).enumerate() {
            if r >= lm.rows() {
                return Err(Error::shape("cross_entropy row", (r, 0), lm.shape()));
            }
            if y >= c {
                return Err(Error::LabelRange {
                    ty: String::from("<logits>"),
                    label: y,
                    classes: c,
                });
            }
            let row = lm.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
            softmax_row(row, probs.row_mut(k));
        }
        let value = Matrix::filled(1, 1, weight * loss);
        let rg = self.rg(logits);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                rows: rows.to_vec(),
                labels: labels.to_vec(),
                weight,
                probs,
            },
            rg,
        ))
    }

    /// Reverse pass from `output`, seeded with ones.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let (r, c) = self.shape(output);
        grads[output.0] = Some(Matrix::filled(r, c, 1.0));

        fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(m) => m.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        acc(&mut grads, *a, kernels::matmul_nt(&g, self.value(*b)));
                    }
                    if self.rg(*b) {
                        acc(&mut grads, *b, kernels::matmul_tn(self.value(*a), &g));
                    }
                }
                Op::SpMM(a, b) => {
                    acc(&mut grads, *b, kernels::spmm(&a.transpose, &g));
                }
                Op::Elu(x) => {
                    let xv = self.value(*x);
                    let mut d = g;
                    for (dv, &xi) in d.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        if xi <= 0.0 {
                            *dv *= xi.exp();
                        }
                    }
                    acc(&mut grads, *x, d);
                }
                Op::SoftmaxRows(x) => {
                    let s = &node.value;
                    let mut d = g;
                    for i in 0..s.rows() {
                        let si = s.row(i);
                        let di = d.row_mut(i);
                        let dot: f64 = si.iter().zip(di.iter()).map(|(a, b)| a * b).sum();
                        for (dv, &sv) in di.iter_mut().zip(si) {
                            *dv = sv * (*dv - dot);
                        }
                    }
                    acc(&mut grads, *x, d);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        if self.rg(p) {
                            acc(&mut grads, p, g.col_block(start, w));
                        }
                        start += w;
                    }
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        if self.rg(p) {
                            acc(&mut grads, p, g.clone());
                        }
                    }
                }
                Op::Scale(x, s) => {
                    acc(&mut grads, *x, g.scaled(*s));
                }
                Op::ColScale { z, att, col } => {
                    let (zv, av) = (self.value(*z), self.value(*att));
                    if self.rg(*z) {
                        let mut dz = g.clone();
                        for i in 0..dz.rows() {
                            let a = av.get(i, *col);
                            dz.row_mut(i).iter_mut().for_each(|x| *x *= a);
                        }
                        acc(&mut grads, *z, dz);
                    }
                    if self.rg(*att) {
                        let mut da = Matrix::zeros(av.rows(), av.cols());
                        for i in 0..da.rows() {
                            let dot: f64 = zv.row(i).iter().zip(g.row(i)).map(|(a, b)| a * b).sum();
                            da.set(i, *col, dot);
                        }
                        acc(&mut grads, *att, da);
                    }
                }
                Op::WeightedSum { parts, att } => {
                    let av = self.value(*att);
                    let mut da = self.rg(*att).then(|| Matrix::zeros(av.rows(), av.cols()));
                    for (c, &p) in parts.iter().enumerate() {
                        let pv = self.value(p);
                        if let Some(da) = &mut da {
                            for i in 0..g.rows() {
                                let dot: f64 =
                                    pv.row(i).iter().zip(g.row(i)).map(|(a, b)| a * b).sum();
                                da.set(i, c, dot);
                            }
                        }
                        if self.rg(p) {
                            let mut dp = g.clone();
                            for i in 0..dp.rows() {
                                let a = av.get(i, c);
                                dp.row_mut(i).iter_mut().for_each(|x| *x *= a);
                            }
                            acc(&mut grads, p, dp);
                        }
                    }
                    if let Some(da) = da {
                        acc(&mut grads, *att, da);
                    }
                }
                Op::RowBlock { x, start } => {
                    let (r, c) = self.shape(*x);
                    let mut d = Matrix::zeros(r, c);
                    for i in 0..g.rows() {
                        d.row_mut(start + i).copy_from_slice(g.row(i));
                    }
                    acc(&mut grads, *x, d);
                }
                Op::Mask(x, mask) => {
                    let mut d = g;
                    for (dv, m) in d.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                        *dv *= m;
                    }
                    acc(&mut grads, *x, d);
                }
                Op::CrossEntropy {
                    logits,
                    rows,
                    labels,
                    weight,
                    probs,
                } => {
                    let up = g.get(0, 0) * weight;
                    let (lr, lc) = self.shape(*logits);
                    let mut d = Matrix::zeros(lr, lc);
                    for (k, (&r, &y)) in rows.iter().zip(labels).enumerate() {
                        let dst = d.row_mut(r);
                        for (j, (dv, &p)) in dst.iter_mut().zip(probs.row(k)).enumerate() {
                            *dv += up * (p - if j == y { 1.0 } else { 0.0 });
                        }
                    }
                    acc(&mut grads, *logits, d);
                }
            }
        }
        Gradients { grads }
    }
}
