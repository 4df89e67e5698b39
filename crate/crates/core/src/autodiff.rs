//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every primitive applied during one forward pass. Each
//! recorded node keeps its forward value, so [`Tape::backward`] can walk the
//! nodes in reverse and accumulate adjoints into every differentiable leaf
//! reachable from the loss. Nodes are appended in evaluation order, which makes
//! the tape topologically sorted by construction.
//!
//! ```
//! use advcausal_core::autodiff::Tape;
//! use advcausal_core::Tensor;
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
//! let sq = tape.mul(w, w).unwrap();
//! let loss = tape.sum(sq);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap(), &[2.0, 4.0, 6.0]);
//! ```
//!
//! Broadcasting is limited to adding a bias row over the leading (batch) axis.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{ensure, Error, Result};
use crate::tensor::Tensor;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node recorded on a particular [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    pub fn index(&self) -> usize {
        self.index
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Softmax(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
    Sign(Var),
    Clamp(Var, f64, f64),
    Gather(Var, Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation graph of one forward pass.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Adjoints produced by [`Tape::backward`], keyed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Total derivative of the loss with respect to `var`, if it was reached.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index)?.as_deref()
    }

    /// Like [`Gradients::get`] but yields zeros for unreachable nodes.
    pub fn get_or_zeros(&self, var: Var, len: usize) -> Vec<f64> {
        match self.get(var) {
            Some(g) => g.to_vec(),
            None => vec![0.0; len],
        }
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf tensor.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Records a differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Records a constant leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        debug_assert_eq!(var.tape, self.id, "var from another tape");
        &self.nodes[var.index].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.index].requires_grad
    }

    fn check(&self, var: Var) -> Result<&Tensor> {
        ensure!(
            var.tape == self.id && var.index < self.nodes.len(),
            "variable does not belong to this tape"
        );
        Ok(&self.nodes[var.index].value)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(value.all_finite(), "non-finite forward value in {:?}", op);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.index].requires_grad)
    }

    /// Matrix product of `(n, k)` and `(k, m)` operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.check(a)?, self.check(b)?);
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(shape_err("matmul", ta, tb));
        }
        let (n, k, m) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let aip = ad[i * k + p];
                let brow = &bd[p * m..(p + 1) * m];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        let value = Tensor::new(vec![n, m], out)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// Transpose of a matrix.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ta = self.check(a)?;
        ensure!(ta.shape().len() == 2, "transpose needs a matrix, got {:?}", ta.shape());
        let (n, m) = (ta.shape()[0], ta.shape()[1]);
        let value = Tensor::new(vec![m, n], transpose_data(ta.data(), n, m))?;
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Transpose(a), rg))
    }

    /// Elementwise sum; `b` may also be a bias broadcast over `a`'s leading axis.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.check(a)?, self.check(b)?);
        let rg = self.rg(&[a, b]);
        if ta.shape() == tb.shape() {
            let value = ta.zip_map(tb, |x, y| x + y)?;
            return Ok(self.push(value, Op::Add(a, b), rg));
        }
        if ta.shape().len() >= 2 && tb.shape() == &ta.shape()[1..] {
            let m = tb.numel();
            let bd = tb.data();
            let data = ta
                .data()
                .iter()
                .enumerate()
                .map(|(i, &x)| x + bd[i % m])
                .collect();
            let value = Tensor::new(ta.shape().to_vec(), data)?;
            return Ok(self.push(value, Op::AddBias(a, b), rg));
        }
        Err(shape_err("add", ta, tb))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.check(a)?, self.check(b)?);
        let value = ta.zip_map(tb, |x, y| x - y).map_err(|_| shape_err("sub", ta, tb))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.check(a)?, self.check(b)?);
        let value = ta.zip_map(tb, |x, y| x * y).map_err(|_| shape_err("mul", ta, tb))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        let rg = self.rg(&[a]);
        self.push(value, Op::Scale(a, factor), rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(&[a]);
        self.push(value, Op::Relu(a), rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ta = self.check(a)?;
        let last = *ta.shape().last().unwrap_or(&1);
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(last) {
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = libm::exp(*v - max);
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Softmax(a), rg))
    }

    /// Natural logarithm; every entry must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let ta = self.check(a)?;
        ensure!(
            ta.data().iter().all(|&x| x > 0.0),
            "log of a non-positive entry"
        );
        let value = ta.map(libm::log);
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Log(a), rg))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Mean of all entries, as a scalar.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Elementwise sign with `sign(0) = 0`; its derivative is zero.
    pub fn sign(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sign);
        let rg = self.rg(&[a]);
        self.push(value, Op::Sign(a), rg)
    }

    /// Clamps every entry into `[lo, hi]`. Gradient passes only inside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        ensure!(lo <= hi, "clamp bounds reversed: {} > {}", lo, hi);
        let value = self.check(a)?.map(|x| x.clamp(lo, hi));
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Clamp(a, lo, hi), rg))
    }

    /// Picks `a[i, index[i]]` for every row `i` of a matrix, giving an `(n,)` vector.
    pub fn gather(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let ta = self.check(a)?;
        ensure!(ta.shape().len() == 2, "gather needs a matrix, got {:?}", ta.shape());
        let (n, m) = (ta.shape()[0], ta.shape()[1]);
        ensure!(index.len() == n, "gather: {} indices for {} rows", index.len(), n);
        ensure!(index.iter().all(|&j| j < m), "gather: column index out of range {}", m);
        let data = index.iter().enumerate().map(|(i, &j)| ta.data()[i * m + j]).collect();
        let value = Tensor::new(vec![n], data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Gather(a, index.to_vec()), rg))
    }

    /// Propagates adjoints from the scalar `loss` back to every differentiable node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.check(loss)?;
        ensure!(lt.is_scalar(), "backward needs a scalar loss, got shape {:?}", lt.shape());
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.index] = Some(vec![1.0]);

        for idx in (0..=loss.index).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for g in grads.iter().flatten() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("backward"));
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], var: Var, delta: Vec<f64>) {
        if !self.nodes[var.index].requires_grad {
            return;
        }
        match &mut grads[var.index] {
            Some(acc) => {
                for (a, d) in acc.iter_mut().zip(delta) {
                    *a += d;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.requires_grad(*a) {
                    let mut da = vec![0.0; n * k];
                    for i in 0..n {
                        for p in 0..k {
                            let brow = &tb.data()[p * m..(p + 1) * m];
                            let grow = &g[i * m..(i + 1) * m];
                            da[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    self.accumulate(grads, *a, da);
                }
                if self.requires_grad(*b) {
                    let mut db = vec![0.0; k * m];
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        for p in 0..k {
                            let aip = ta.data()[i * k + p];
                            for (d, &gv) in db[p * m..(p + 1) * m].iter_mut().zip(grow) {
                                *d += aip * gv;
                            }
                        }
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Transpose(a) => {
                let (n, m) = (out.shape()[0], out.shape()[1]);
                self.accumulate(grads, *a, transpose_data(g, n, m));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::AddBias(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                let m = self.value(*b).numel();
                let mut db = vec![0.0; m];
                for row in g.chunks(m) {
                    for (d, &gv) in db.iter_mut().zip(row) {
                        *d += gv;
                    }
                }
                self.accumulate(grads, *b, db);
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da = g.iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                let db = g.iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Scale(a, f) => {
                self.accumulate(grads, *a, g.iter().map(|v| v * f).collect());
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                let d = g
                    .iter()
                    .zip(x)
                    .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, d);
            }
            Op::Softmax(a) => {
                let last = *out.shape().last().unwrap_or(&1);
                let mut d = vec![0.0; g.len()];
                for ((drow, grow), yrow) in d
                    .chunks_mut(last)
                    .zip(g.chunks(last))
                    .zip(out.data().chunks(last))
                {
                    let dot: f64 = grow.iter().zip(yrow).map(|(x, y)| x * y).sum();
                    for ((dv, &gv), &yv) in drow.iter_mut().zip(grow).zip(yrow) {
                        *dv = yv * (gv - dot);
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::Log(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, g.iter().zip(x).map(|(gv, xv)| gv / xv).collect());
            }
            Op::Sum(a) => {
                let n = self.value(*a).numel();
                self.accumulate(grads, *a, vec![g[0]; n]);
            }
            Op::Mean(a) => {
                let n = self.value(*a).numel();
                self.accumulate(grads, *a, vec![g[0] / n as f64; n]);
            }
            Op::Sign(a) => {
                let n = self.value(*a).numel();
                self.accumulate(grads, *a, vec![0.0; n]);
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(*a).data();
                let d = g
                    .iter()
                    .zip(x)
                    .map(|(&gv, &xv)| if xv >= *lo && xv <= *hi { gv } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, d);
            }
            Op::Gather(a, index) => {
                let m = self.value(*a).shape()[1];
                let mut d = vec![0.0; self.value(*a).numel()];
                for (i, (&j, &gv)) in index.iter().zip(g).enumerate() {
                    d[i * m + j] = gv;
                }
                self.accumulate(grads, *a, d);
            }
        }
    }
}

/// `sign` with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn transpose_data(data: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[j * n + i] = data[i * m + j];
        }
    }
    out
}
