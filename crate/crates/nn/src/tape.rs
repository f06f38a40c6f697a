//! Tape-based reverse-mode automatic differentiation.
//!
//! Every operation appends a node holding its forward value plus whatever
//! it needs for the backward pass. [`Tape::backward`] walks the tape in
//! reverse and accumulates gradients for every node that depends on a
//! leaf created with [`Tape::leaf`].

use crate::error::{NnError, Result};
use crate::scalar::{gemm, Scalar};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
struct BmmDims {
    batch_a: usize,
    batch_b: usize,
    batch: usize,
    m: usize,
    k: usize,
    n: usize,
    trans_b: bool,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Constant,
    Bmm {
        a: Var,
        b: Var,
        dims: BmmDims,
    },
    Add {
        a: Var,
        b: Var,
    },
    AddBias {
        x: Var,
        bias: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        a: Var,
        factor: T,
    },
    Transpose {
        a: Var,
        rows: usize,
        cols: usize,
    },
    Reshape {
        a: Var,
    },
    Relu {
        a: Var,
    },
    Softmax {
        a: Var,
    },
    CausalSoftmax {
        a: Var,
        scale: T,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    SumLeading {
        x: Var,
        parts: usize,
    },
    Sum {
        a: Var,
    },
    CrossEntropy {
        logits: Var,
        probs: Vec<T>,
        targets: Vec<Option<usize>>,
        count: usize,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A computation tape. Values live as long as the tape.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, lhs: &[usize], rhs: &[usize]) -> NnError {
    NnError::ShapeMismatch {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, parents: &[Var]) -> Var {
        let requires_grad = match op {
            Op::Leaf => true,
            Op::Constant => false,
            _ => parents.iter().any(|p| self.nodes[p.0].requires_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input (parameter).
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, &[])
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant, &[])
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Batched matrix product. `a` is `[m, k]` or `[Ba, m, k]`; `b` is
    /// `[k, n]` or `[Bb, k, n]` (`[.., n, k]` when `trans_b`). A batch of 1
    /// (or a rank-2 operand) broadcasts. A rank-2 `a` may have any number of
    /// rows; higher-rank leading dims of `a` are flattened into `m` when `b`
    /// is rank 2.
    pub fn bmm(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() < 2 || sb.len() < 2 || sb.len() > 3 || sa.len() > 3 {
            return Err(mismatch("bmm", &sa, &sb));
        }
        let (batch_b, kb, n) = if sb.len() == 2 {
            (1, sb[0], sb[1])
        } else {
            (sb[0], sb[1], sb[2])
        };
        let (kb, n) = if trans_b { (n, kb) } else { (kb, n) };
        let (batch_a, m, k) = if sa.len() == 2 || sb.len() == 2 {
            let k = *sa.last().unwrap();
            (1, sa[..sa.len() - 1].iter().product(), k)
        } else {
            (sa[0], sa[1], sa[2])
        };
        if k != kb || (batch_a != batch_b && batch_a != 1 && batch_b != 1) {
            return Err(mismatch("bmm", &sa, &sb));
        }
        let batch = batch_a.max(batch_b);
        let dims = BmmDims {
            batch_a,
            batch_b,
            batch,
            m,
            k,
            n,
            trans_b,
        };
        let out_shape = if sb.len() == 2 {
            let mut s = sa[..sa.len() - 1].to_vec();
            s.push(n);
            s
        } else {
            vec![batch, m, n]
        };
        let mut out = Tensor::zeros(&out_shape);
        {
            let av = self.value(a).data();
            let bv = self.value(b).data();
            let od = out.data_mut();
            for i in 0..batch {
                let ai = if batch_a == 1 { 0 } else { i };
                let bi = if batch_b == 1 { 0 } else { i };
                gemm(
                    m,
                    k,
                    n,
                    &av[ai * m * k..(ai + 1) * m * k],
                    false,
                    &bv[bi * k * n..(bi + 1) * k * n],
                    trans_b,
                    &mut od[i * m * n..(i + 1) * m * n],
                    false,
                );
            }
        }
        Ok(self.push(out, Op::Bmm { a, b, dims }, &[a, b]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a).len() != 2 || self.shape(b).len() != 2 {
            return Err(mismatch("matmul", self.shape(a), self.shape(b)));
        }
        self.bmm(a, b, false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("add", self.shape(a), self.shape(b)));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.push(out, Op::Add { a, b }, &[a, b]))
    }

    /// Adds `bias` (shape = trailing dims of `x`) to every leading slice.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let sx = self.shape(x);
        let sb = self.shape(bias);
        if sb.len() > sx.len() || sx[sx.len() - sb.len()..] != *sb {
            return Err(mismatch("add_bias", sx, sb));
        }
        let mut out = self.value(x).clone();
        let bv = self.value(bias).data();
        let w = bv.len();
        for chunk in out.data_mut().chunks_mut(w) {
            for (o, &b) in chunk.iter_mut().zip(bv) {
                *o = *o + b;
            }
        }
        Ok(self.push(out, Op::AddBias { x, bias }, &[x, bias]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("mul", self.shape(a), self.shape(b)));
        }
        let bv = self.value(b).data();
        let out = Tensor::new(
            self.shape(a).to_vec(),
            self.value(a)
                .data()
                .iter()
                .zip(bv)
                .map(|(&x, &y)| x * y)
                .collect(),
        )?;
        Ok(self.push(out, Op::Mul { a, b }, &[a, b]))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(out, Op::Scale { a, factor }, &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        let (rows, cols) = (self.shape(a)[0], self.shape(a)[1]);
        Ok(self.push(out, Op::Transpose { a, rows, cols }, &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(out, Op::Reshape { a }, &[a]))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .map(|x| if x > T::zero() { x } else { T::zero() });
        self.push(out, Op::Relu { a }, &[a])
    }

    /// Softmax over the last axis, stabilised by max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        let w = out.last_dim();
        for row in out.data_mut().chunks_mut(w) {
            softmax_in_place(row);
        }
        self.push(out, Op::Softmax { a }, &[a])
    }

    /// Scaled softmax over the last axis of `[.., t, t]` scores with a causal
    /// mask: row `i` only sees columns `0..=i`, masked entries are exactly 0.
    pub fn causal_softmax(&mut self, a: Var, scale: T) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let t = *shape.last().unwrap_or(&0);
        if shape.len() < 2 || shape[shape.len() - 2] != t {
            return Err(NnError::InvalidShape(format!(
                "causal_softmax needs square trailing dims, got {shape:?}"
            )));
        }
        let mut out = self.value(a).map(|x| x * scale);
        for (r, row) in out.data_mut().chunks_mut(t).enumerate() {
            let i = r % t;
            softmax_in_place(&mut row[..=i]);
            for x in &mut row[i + 1..] {
                *x = T::zero();
            }
        }
        Ok(self.push(out, Op::CausalSoftmax { a, scale }, &[a]))
    }

    /// Layer norm over the last axis with affine `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let d = self.value(x).last_dim();
        if self.shape(gain) != [d] || self.shape(bias) != [d] {
            return Err(mismatch("layer_norm", self.shape(x), self.shape(gain)));
        }
        let xv = self.value(x);
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let rows = xv.len() / d;
        let mut xhat = Vec::with_capacity(xv.len());
        let mut rstd = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(xv.len());
        let dn = T::from_f64(d as f64);
        for row in xv.data().chunks(d) {
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let r = T::one() / (var + eps).sqrt();
            rstd.push(r);
            for (j, &v) in row.iter().enumerate() {
                let h = (v - mean) * r;
                xhat.push(h);
                out.push(h * g[j] + b[j]);
            }
        }
        let out = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            &[x, gain, bias],
        ))
    }

    /// Gathers rows of a `[vocab, d]` table.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        if shape.len() != 2 {
            return Err(NnError::InvalidShape("embedding table must be 2-D".into()));
        }
        let (v, d) = (shape[0], shape[1]);
        let tv = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(NnError::IndexOutOfRange { index: id, len: v });
            }
            out.extend_from_slice(&tv[id * d..(id + 1) * d]);
        }
        let out = Tensor::new(vec![ids.len(), d], out)?;
        Ok(self.push(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        ))
    }

    /// Sums over the leading axis: `[p, ..rest] -> [..rest]`.
    pub fn sum_leading(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.is_empty() {
            return Err(NnError::InvalidShape("sum_leading on a scalar".into()));
        }
        let parts = shape[0];
        let rest = &shape[1..];
        let w: usize = rest.iter().product();
        let mut out = Tensor::zeros(rest);
        let xv = self.value(x).data();
        for p in 0..parts {
            for (o, &v) in out.data_mut().iter_mut().zip(&xv[p * w..(p + 1) * w]) {
                *o = *o + v;
            }
        }
        Ok(self.push(out, Op::SumLeading { x, parts }, &[x]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().copied().sum();
        self.push(Tensor::scalar(total), Op::Sum { a }, &[a])
    }

    /// Mean negative log-likelihood over rows whose target is `Some`.
    /// Returns the scalar loss and the per-row losses (0 for masked rows).
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: &[Option<usize>],
    ) -> Result<(Var, Vec<T>)> {
        let shape = self.shape(logits).to_vec();
        let v = *shape.last().unwrap_or(&0);
        let rows = self.value(logits).len() / v.max(1);
        if rows != targets.len() {
            return Err(NnError::InvalidShape(format!(
                "{} targets for {rows} rows",
                targets.len()
            )));
        }
        let mut probs = self.value(logits).data().to_vec();
        let mut per_row = vec![T::zero(); rows];
        let mut total = T::zero();
        let mut count = 0;
        for (r, row) in probs.chunks_mut(v).enumerate() {
            let Some(t) = targets[r] else { continue };
            if t >= v {
                return Err(NnError::TargetOutOfRange {
                    target: t,
                    vocab: v,
                });
            }
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
            let loss = lse - row[t];
            per_row[r] = loss;
            total = total + loss;
            count += 1;
            for x in row.iter_mut() {
                *x = (*x - lse).exp();
            }
        }
        let mean = if count > 0 {
            total / T::from_f64(count as f64)
        } else {
            T::zero()
        };
        let var = self.push(
            Tensor::scalar(mean),
            Op::CrossEntropy {
                logits,
                probs,
                targets: targets.to_vec(),
                count,
            },
            &[logits],
        );
        Ok((var, per_row))
    }

    /// Reverse pass from a scalar `loss`. Returns gradients for every node
    /// that requires one.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let loss_shape = self.shape(loss).to_vec();
        grads[loss.0] = Some(Tensor::filled(&loss_shape, T::one()));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, i: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::Bmm { a, b, dims } => {
                let d = *dims;
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                let gd = g.data();
                let (m, k, n) = (d.m, d.k, d.n);
                if self.wants(*a) {
                    let mut ga = Tensor::zeros(self.shape(*a));
                    for bi in 0..d.batch {
                        let ai = if d.batch_a == 1 { 0 } else { bi };
                        let bj = if d.batch_b == 1 { 0 } else { bi };
                        // dA = dC op(B)^T
                        gemm(
                            m,
                            n,
                            k,
                            &gd[bi * m * n..(bi + 1) * m * n],
                            false,
                            &bv[bj * k * n..(bj + 1) * k * n],
                            !d.trans_b,
                            &mut ga.data_mut()[ai * m * k..(ai + 1) * m * k],
                            true,
                        );
                    }
                    self.accumulate(grads, *a, ga);
                }
                if self.wants(*b) {
                    let mut gb = Tensor::zeros(self.shape(*b));
                    for bi in 0..d.batch {
                        let ai = if d.batch_a == 1 { 0 } else { bi };
                        let bj = if d.batch_b == 1 { 0 } else { bi };
                        let a_blk = &av[ai * m * k..(ai + 1) * m * k];
                        let g_blk = &gd[bi * m * n..(bi + 1) * m * n];
                        let out = &mut gb.data_mut()[bj * k * n..(bj + 1) * k * n];
                        if d.trans_b {
                            // dB (stored n x k) = dC^T A
                            gemm(n, m, k, g_blk, true, a_blk, false, out, true);
                        } else {
                            // dB = A^T dC
                            gemm(k, m, n, a_blk, true, g_blk, false, out, true);
                        }
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::AddBias { x, bias } => {
                self.accumulate(grads, *x, g.clone());
                if self.wants(*bias) {
                    let mut gb = Tensor::zeros(self.shape(*bias));
                    let w = gb.len();
                    for chunk in g.data().chunks(w) {
                        for (o, &v) in gb.data_mut().iter_mut().zip(chunk) {
                            *o = *o + v;
                        }
                    }
                    self.accumulate(grads, *bias, gb);
                }
            }
            Op::Mul { a, b } => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.wants(*a) {
                    let ga = Tensor::from_fn(av.shape(), |j| g.data()[j] * bv.data()[j]);
                    self.accumulate(grads, *a, ga);
                }
                if self.wants(*b) {
                    let gb = Tensor::from_fn(bv.shape(), |j| g.data()[j] * av.data()[j]);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Scale { a, factor } => {
                let f = *factor;
                self.accumulate(grads, *a, g.map(|x| x * f));
            }
            Op::Transpose { a, rows, cols } => {
                let (r, c) = (*rows, *cols);
                // g is [c, r]
                let ga = Tensor::from_fn(&[r, c], |j| g.data()[(j % c) * r + j / c]);
                self.accumulate(grads, *a, ga);
            }
            Op::Reshape { a } => {
                let ga = g.clone().reshaped(self.shape(*a)).expect("reshape grad");
                self.accumulate(grads, *a, ga);
            }
            Op::Relu { a } => {
                let av = self.value(*a).data();
                let ga = Tensor::from_fn(g.shape(), |j| {
                    if av[j] > T::zero() {
                        g.data()[j]
                    } else {
                        T::zero()
                    }
                });
                self.accumulate(grads, *a, ga);
            }
            Op::Softmax { a } => {
                let y = &node.value;
                let w = y.last_dim();
                let mut ga = Tensor::zeros(y.shape());
                for ((yr, gr), out) in y
                    .data()
                    .chunks(w)
                    .zip(g.data().chunks(w))
                    .zip(ga.data_mut().chunks_mut(w))
                {
                    softmax_backward(yr, gr, out, T::one());
                }
                self.accumulate(grads, *a, ga);
            }
            Op::CausalSoftmax { a, scale } => {
                let y = &node.value;
                let t = y.last_dim();
                let mut ga = Tensor::zeros(y.shape());
                for (r, ((yr, gr), out)) in y
                    .data()
                    .chunks(t)
                    .zip(g.data().chunks(t))
                    .zip(ga.data_mut().chunks_mut(t))
                    .enumerate()
                {
                    let i = r % t;
                    softmax_backward(&yr[..=i], &gr[..=i], &mut out[..=i], *scale);
                }
                self.accumulate(grads, *a, ga);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let d = self.value(*x).last_dim();
                let gv = self.value(*gain).data();
                let dn = T::from_f64(d as f64);
                if self.wants(*gain) || self.wants(*bias) {
                    let mut gg = Tensor::zeros(&[d]);
                    let mut gb = Tensor::zeros(&[d]);
                    for (gr, hr) in g.data().chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            gg.data_mut()[j] = gg.data()[j] + gr[j] * hr[j];
                            gb.data_mut()[j] = gb.data()[j] + gr[j];
                        }
                    }
                    self.accumulate(grads, *gain, gg);
                    self.accumulate(grads, *bias, gb);
                }
                if self.wants(*x) {
                    let mut gx = Tensor::zeros(self.shape(*x));
                    for (r, ((gr, hr), out)) in g
                        .data()
                        .chunks(d)
                        .zip(xhat.chunks(d))
                        .zip(gx.data_mut().chunks_mut(d))
                        .enumerate()
                    {
                        let mut sum_dh = T::zero();
                        let mut sum_dh_h = T::zero();
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            sum_dh = sum_dh + dh;
                            sum_dh_h = sum_dh_h + dh * hr[j];
                        }
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            out[j] = rstd[r] * (dh - sum_dh / dn - hr[j] * sum_dh_h / dn);
                        }
                    }
                    self.accumulate(grads, *x, gx);
                }
            }
            Op::Embedding { table, ids } => {
                let d = self.value(*table).last_dim();
                let mut gt = Tensor::zeros(self.shape(*table));
                for (r, &id) in ids.iter().enumerate() {
                    let src = &g.data()[r * d..(r + 1) * d];
                    for (o, &v) in gt.data_mut()[id * d..(id + 1) * d].iter_mut().zip(src) {
                        *o = *o + v;
                    }
                }
                self.accumulate(grads, *table, gt);
            }
            Op::SumLeading { x, parts } => {
                let mut gx = Vec::with_capacity(g.len() * parts);
                for _ in 0..*parts {
                    gx.extend_from_slice(g.data());
                }
                let gx = Tensor::new(self.shape(*x).to_vec(), gx).expect("sum_leading grad");
                self.accumulate(grads, *x, gx);
            }
            Op::Sum { a } => {
                self.accumulate(grads, *a, Tensor::filled(self.shape(*a), g.item()));
            }
            Op::CrossEntropy {
                logits,
                probs,
                targets,
                count,
            } => {
                if *count == 0 {
                    return;
                }
                let v = self.value(*logits).last_dim();
                let scale = g.item() / T::from_f64(*count as f64);
                let mut gl = Tensor::zeros(self.shape(*logits));
                for (r, out) in gl.data_mut().chunks_mut(v).enumerate() {
                    let Some(t) = targets[r] else { continue };
                    for (j, o) in out.iter_mut().enumerate() {
                        let p = probs[r * v + j];
                        let onehot = if j == t { T::one() } else { T::zero() };
                        *o = (p - onehot) * scale;
                    }
                }
                self.accumulate(grads, *logits, gl);
            }
        }
    }
}

fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total = total + *x;
    }
    for x in row.iter_mut() {
        *x = *x / total;
    }
}

fn softmax_backward<T: Scalar>(y: &[T], g: &[T], out: &mut [T], scale: T) {
    let dot: T = y.iter().zip(g).map(|(&a, &b)| a * b).sum();
    for ((o, &yi), &gi) in out.iter_mut().zip(y).zip(g) {
        *o = scale * yi * (gi - dot);
    }
}

/// Gradients indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn softmax_uniform_and_normalised() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::filled(&[2, 5], 3.0));
        let y = tape.softmax(x);
        for &v in tape.value(y).data() {
            assert!((v - 0.2).abs() < 1e-12);
        }
        let z = tape.constant(t(&[1, 3], &[1000.0, -5.0, 2.0]));
        let y = tape.softmax(z);
        let s: f64 = tape.value(y).data().iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
        assert!(tape.value(y).all_finite());
    }

    #[test]
    fn causal_softmax_masks_the_future() {
        let mut tape = Tape::<f32>::new();
        let x = tape.constant(Tensor::from_fn(&[2, 4, 4], |i| (i as f32 * 0.37).sin()));
        let y = tape.causal_softmax(x, 0.5).unwrap();
        let v = tape.value(y);
        for r in 0..8 {
            let row = v.row(r);
            let i = r % 4;
            assert!(row[i + 1..].iter().all(|&x| x == 0.0));
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn layer_norm_zero_variance_is_finite() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::filled(&[2, 4], 7.0));
        let g = tape.constant(Tensor::filled(&[4], 1.0));
        let b = tape.constant(Tensor::zeros(&[4]));
        let y = tape.layer_norm(x, g, b, 1e-5).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layer_norm_standardises() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_fn(&[3, 8], |i| (i * i) as f64 * 0.1));
        let g = tape.constant(Tensor::filled(&[8], 1.0));
        let b = tape.constant(Tensor::zeros(&[8]));
        let y = tape.layer_norm(x, g, b, 1e-12).unwrap();
        for r in 0..3 {
            let row = tape.value(y).row(r);
            let mean: f64 = row.iter().sum::<f64>() / 8.0;
            let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_entropy_limits() {
        let mut tape = Tape::<f64>::new();
        let uniform = tape.constant(Tensor::zeros(&[3, 15]));
        let (loss, per_row) = tape
            .cross_entropy(uniform, &[Some(1), None, Some(14)])
            .unwrap();
        assert!((tape.value(loss).item() - 15f64.ln()).abs() < 1e-12);
        assert_eq!(per_row[1], 0.0);

        let peaked = tape.constant(Tensor::from_fn(
            &[1, 15],
            |j| if j == 4 { 60.0 } else { 0.0 },
        ));
        let (loss, _) = tape.cross_entropy(peaked, &[Some(4)]).unwrap();
        assert!(tape.value(loss).item() < 1e-20);

        let bad = tape.constant(Tensor::zeros(&[1, 15]));
        assert!(matches!(
            tape.cross_entropy(bad, &[Some(15)]),
            Err(NnError::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn masked_rows_get_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let logits = tape.leaf(Tensor::from_fn(&[3, 4], |i| i as f64 * 0.1));
        let (loss, _) = tape.cross_entropy(logits, &[None, Some(2), None]).unwrap();
        let grads = tape.backward(loss);
        let g = grads.get(logits).unwrap();
        assert!(g.row(0).iter().all(|&v| v == 0.0));
        assert!(g.row(2).iter().all(|&v| v == 0.0));
        assert!(g.row(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::filled(&[2, 2], 1.0));
        let b = tape.leaf(Tensor::filled(&[2, 2], 2.0));
        let c = tape.mul(a, b).unwrap();
        let s = tape.sum(c);
        let grads = tape.backward(s);
        assert!(grads.get(a).is_none());
        assert_eq!(grads.get(b).unwrap().data(), &[1.0; 4]);
    }
}
