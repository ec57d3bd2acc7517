//! Reverse-mode automatic differentiation over 2-D tensors.
//!
//! A [`Tape`] records every operation of one forward pass and is rebuilt per
//! training iteration. [`Var`] is a cheap copyable handle into the tape.
//! Calling [`Tape::backward`] on a scalar root fills the gradient of every
//! recorded node; a second backward call on the same tape is an error.
//!
//! All tape values are matrices `[rows x cols]`; scalars are `[1 x 1]` and
//! vectors are single rows. The op vocabulary is exactly what the field
//! networks, the recurrent encoder and the training losses need: matrix
//! multiply, broadcast bias/column ops, elementwise arithmetic, a few
//! activations, column slicing and concatenation, and row/full reductions.

use ndarray::{ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `[B x N] + [1 x N]` with the row broadcast over the batch.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    /// Per-row squared norm, `[B x N] -> [B x 1]`.
    RowNormSq(Var),
    /// Per-row dot product, `([B x N], [B x N]) -> [B x 1]`.
    RowDot(Var, Var),
    /// `[B x N]` scaled per row by a `[B x 1]` column.
    ColMul(Var, Var),
    Mean(Var),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
}

/// One forward pass worth of recorded operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
    backward_done: bool,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            grad: Vec::new(),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// Shape of a node as `(rows, cols)`.
    pub fn dims_of(&self, v: Var) -> (usize, usize) {
        self.dims(v)
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> Error {
        let (ar, ac) = self.dims(a);
        let (br, bc) = self.dims(b);
        Error::ShapeMismatch {
            op,
            lhs: vec![ar, ac],
            rhs: vec![br, bc],
        }
    }

    /// Record a constant input; 1-D tensors enter as single rows.
    pub fn leaf(&mut self, t: &Tensor) -> Result<Var> {
        let (rows, cols) = match t.shape() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            other => {
                return Err(Error::ShapeMismatch {
                    op: "tape leaf",
                    lhs: other.to_vec(),
                    rhs: vec![0, 0],
                })
            }
        };
        Ok(self.push(rows, cols, t.data().to_vec(), Op::Leaf))
    }

    /// Record a named parameter so its gradient can be harvested later.
    pub fn param(&mut self, name: &str, value: &Tensor) -> Result<Var> {
        let v = self.leaf(value)?;
        self.params.push((name.to_string(), v));
        Ok(v)
    }

    /// Value of a node as a tensor.
    pub fn value(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::from_vec(&[n.rows, n.cols], n.value.clone())
            .expect("node volume is consistent")
    }

    /// Value of a `[1 x 1]` node.
    pub fn value_scalar(&self, v: Var) -> Result<f64> {
        let n = &self.nodes[v.0];
        if n.value.len() != 1 {
            return Err(Error::contract(format!(
                "expected scalar node, got [{} x {}]",
                n.rows, n.cols
            )));
        }
        Ok(n.value[0])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(self.shape_err("tape matmul", a, b));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            1.0,
            view(&self.nodes[a.0].value, m, k),
            view(&self.nodes[b.0].value, k, n),
            0.0,
            view_mut(&mut out, m, n),
        );
        Ok(self.push(m, n, out, Op::MatMul(a, b)))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        let (br, bc) = self.dims(bias);
        if br != 1 || bc != n {
            return Err(self.shape_err("tape add_row", a, bias));
        }
        let mut out = self.nodes[a.0].value.clone();
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] += self.nodes[bias.0].value[j];
            }
        }
        Ok(self.push(m, n, out, Op::AddRow(a, bias)))
    }

    fn binary_same_shape(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(self.shape_err(name, a, b));
        }
        let (m, n) = self.dims(a);
        let out: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(self.push(m, n, out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "tape add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "tape sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "tape mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let (m, n) = self.dims(a);
        let out: Vec<f64> = self.nodes[a.0].value.iter().map(|&x| k * x).collect();
        self.push(m, n, out, Op::Scale(a, k))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (m, n) = self.dims(a);
        let out: Vec<f64> = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        self.push(m, n, out, op)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * sigmoid(x), Op::Silu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// Concatenate along columns; all parts share a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::contract("concat_cols needs at least one part"));
        };
        let (m, _) = self.dims(first);
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.dims(p);
            if r != m {
                return Err(self.shape_err("tape concat_cols", first, p));
            }
            total += c;
        }
        let mut out = vec![0.0; m * total];
        for i in 0..m {
            let mut at = 0;
            for &p in parts {
                let (_, c) = self.dims(p);
                let src = &self.nodes[p.0].value[i * c..(i + 1) * c];
                out[i * total + at..i * total + at + c].copy_from_slice(src);
                at += c;
            }
        }
        Ok(self.push(m, total, out, Op::ConcatCols(parts.to_vec())))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims(a);
        if start >= end || end > n {
            return Err(Error::contract(format!(
                "slice_cols {start}..{end} out of range for {n} columns"
            )));
        }
        let w = end - start;
        let mut out = vec![0.0; m * w];
        for i in 0..m {
            out[i * w..(i + 1) * w]
                .copy_from_slice(&self.nodes[a.0].value[i * n + start..i * n + end]);
        }
        Ok(self.push(m, w, out, Op::SliceCols(a, start)))
    }

    pub fn row_norm_sq(&mut self, a: Var) -> Var {
        let (m, n) = self.dims(a);
        let out: Vec<f64> = (0..m)
            .map(|i| {
                self.nodes[a.0].value[i * n..(i + 1) * n]
                    .iter()
                    .map(|&x| x * x)
                    .sum()
            })
            .collect();
        self.push(m, 1, out, Op::RowNormSq(a))
    }

    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(self.shape_err("tape row_dot", a, b));
        }
        let (m, n) = self.dims(a);
        let out: Vec<f64> = (0..m)
            .map(|i| {
                (0..n)
                    .map(|j| self.nodes[a.0].value[i * n + j] * self.nodes[b.0].value[i * n + j])
                    .sum()
            })
            .collect();
        Ok(self.push(m, 1, out, Op::RowDot(a, b)))
    }

    /// Scale each row of `a` by the matching entry of a `[B x 1]` column.
    pub fn col_mul(&mut self, a: Var, w: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        let (wr, wc) = self.dims(w);
        if wr != m || wc != 1 {
            return Err(self.shape_err("tape col_mul", a, w));
        }
        let mut out = self.nodes[a.0].value.clone();
        for i in 0..m {
            let wi = self.nodes[w.0].value[i];
            for x in &mut out[i * n..(i + 1) * n] {
                *x *= wi;
            }
        }
        Ok(self.push(m, n, out, Op::ColMul(a, w)))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = &self.nodes[a.0].value;
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.push(1, 1, vec![m], Op::Mean(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum::<f64>();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    /// Reverse sweep from a scalar root. Fills every node gradient.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::contract(
                "tape backward called twice; rebuild the tape per forward pass",
            ));
        }
        let (r, c) = self.dims(root);
        if (r, c) != (1, 1) {
            return Err(Error::contract(format!(
                "backward root must be scalar, got [{r} x {c}]"
            )));
        }
        self.backward_done = true;
        for node in &mut self.nodes {
            node.grad = vec![0.0; node.value.len()];
        }
        self.nodes[root.0].grad[0] = 1.0;

        for idx in (0..=root.0).rev() {
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (m, k) = self.dims(a);
                    let (_, n) = self.dims(b);
                    let mut da = vec![0.0; m * k];
                    let mut db = vec![0.0; k * n];
                    {
                        let g = view(&self.nodes[idx].grad, m, n);
                        let av = view(&self.nodes[a.0].value, m, k);
                        let bv = view(&self.nodes[b.0].value, k, n);
                        gemm(1.0, g, bv.t(), 0.0, view_mut(&mut da, m, k));
                        gemm(1.0, av.t(), g, 0.0, view_mut(&mut db, k, n));
                    }
                    self.acc(a, &da);
                    self.acc(b, &db);
                }
                Op::AddRow(a, bias) => {
                    let (m, n) = self.dims(a);
                    let g = self.nodes[idx].grad.clone();
                    let mut dbias = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            dbias[j] += g[i * n + j];
                        }
                    }
                    self.acc(a, &g);
                    self.acc(bias, &dbias);
                }
                Op::Add(a, b) => {
                    let g = self.nodes[idx].grad.clone();
                    self.acc(a, &g);
                    self.acc(b, &g);
                }
                Op::Sub(a, b) => {
                    let g = self.nodes[idx].grad.clone();
                    self.acc(a, &g);
                    let neg: Vec<f64> = g.iter().map(|&x| -x).collect();
                    self.acc(b, &neg);
                }
                Op::Mul(a, b) => {
                    let g = &self.nodes[idx].grad;
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[b.0].value)
                        .map(|(&gi, &bi)| gi * bi)
                        .collect();
                    let db: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(&gi, &ai)| gi * ai)
                        .collect();
                    self.acc(a, &da);
                    self.acc(b, &db);
                }
                Op::Scale(a, k) => {
                    let da: Vec<f64> = self.nodes[idx].grad.iter().map(|&g| k * g).collect();
                    self.acc(a, &da);
                }
                Op::Silu(a) => {
                    let da: Vec<f64> = self.nodes[idx]
                        .grad
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(&g, &x)| {
                            let s = sigmoid(x);
                            g * s * (1.0 + x * (1.0 - s))
                        })
                        .collect();
                    self.acc(a, &da);
                }
                Op::Sigmoid(a) => {
                    let da: Vec<f64> = self.nodes[idx]
                        .grad
                        .iter()
                        .zip(&self.nodes[idx].value)
                        .map(|(&g, &y)| g * y * (1.0 - y))
                        .collect();
                    self.acc(a, &da);
                }
                Op::Tanh(a) => {
                    let da: Vec<f64> = self.nodes[idx]
                        .grad
                        .iter()
                        .zip(&self.nodes[idx].value)
                        .map(|(&g, &y)| g * (1.0 - y * y))
                        .collect();
                    self.acc(a, &da);
                }
                Op::Relu(a) => {
                    let da: Vec<f64> = self.nodes[idx]
                        .grad
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                        .collect();
                    self.acc(a, &da);
                }
                Op::ConcatCols(parts) => {
                    let (m, total) = self.dims(Var(idx));
                    let g = self.nodes[idx].grad.clone();
                    let mut at = 0;
                    for &p in &parts {
                        let (_, c) = self.dims(p);
                        let mut dp = vec![0.0; m * c];
                        for i in 0..m {
                            dp[i * c..(i + 1) * c]
                                .copy_from_slice(&g[i * total + at..i * total + at + c]);
                        }
                        self.acc(p, &dp);
                        at += c;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (m, n) = self.dims(a);
                    let (_, w) = self.dims(Var(idx));
                    let g = self.nodes[idx].grad.clone();
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        da[i * n + start..i * n + start + w]
                            .copy_from_slice(&g[i * w..(i + 1) * w]);
                    }
                    self.acc(a, &da);
                }
                Op::RowNormSq(a) => {
                    let (m, n) = self.dims(a);
                    let g = self.nodes[idx].grad.clone();
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            da[i * n + j] = 2.0 * self.nodes[a.0].value[i * n + j] * g[i];
                        }
                    }
                    self.acc(a, &da);
                }
                Op::RowDot(a, b) => {
                    let (m, n) = self.dims(a);
                    let g = self.nodes[idx].grad.clone();
                    let mut da = vec![0.0; m * n];
                    let mut db = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            da[i * n + j] = g[i] * self.nodes[b.0].value[i * n + j];
                            db[i * n + j] = g[i] * self.nodes[a.0].value[i * n + j];
                        }
                    }
                    self.acc(a, &da);
                    self.acc(b, &db);
                }
                Op::ColMul(a, w) => {
                    let (m, n) = self.dims(a);
                    let g = self.nodes[idx].grad.clone();
                    let mut da = vec![0.0; m * n];
                    let mut dw = vec![0.0; m];
                    for i in 0..m {
                        let wi = self.nodes[w.0].value[i];
                        for j in 0..n {
                            da[i * n + j] = g[i * n + j] * wi;
                            dw[i] += g[i * n + j] * self.nodes[a.0].value[i * n + j];
                        }
                    }
                    self.acc(a, &da);
                    self.acc(w, &dw);
                }
                Op::Mean(a) => {
                    let g = self.nodes[idx].grad[0];
                    let n = self.nodes[a.0].value.len() as f64;
                    let da = vec![g / n; self.nodes[a.0].value.len()];
                    self.acc(a, &da);
                }
                Op::Sum(a) => {
                    let g = self.nodes[idx].grad[0];
                    let da = vec![g; self.nodes[a.0].value.len()];
                    self.acc(a, &da);
                }
            }
        }
        Ok(())
    }

    fn acc(&mut self, v: Var, delta: &[f64]) {
        let g = &mut self.nodes[v.0].grad;
        debug_assert_eq!(g.len(), delta.len());
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += di;
        }
    }

    /// Gradient of any node after [`Tape::backward`].
    pub fn grad_of(&self, v: Var) -> Result<Tensor> {
        if !self.backward_done {
            return Err(Error::contract("grad_of before backward"));
        }
        let n = &self.nodes[v.0];
        Tensor::from_vec(&[n.rows, n.cols], n.grad.clone())
    }

    /// Named parameter gradients after [`Tape::backward`].
    pub fn param_grads(&self) -> Result<Vec<(&str, &[f64])>> {
        if !self.backward_done {
            return Err(Error::contract("param_grads before backward"));
        }
        Ok(self
            .params
            .iter()
            .map(|(name, v)| (name.as_str(), self.nodes[v.0].grad.as_slice()))
            .collect())
    }
}

fn view(data: &[f64], r: usize, c: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((r, c), data).expect("node buffers are dense row-major")
}

fn view_mut(data: &mut [f64], r: usize, c: usize) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((r, c), data).expect("node buffers are dense row-major")
}

fn gemm(alpha: f64, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, beta: f64, mut c: ArrayViewMut2<'_, f64>) {
    ndarray::linalg::general_mat_mul(alpha, &a, &b, beta, &mut c);
}
