//! Reverse-mode automatic differentiation over row-major matrices.
//!
//! A [`Graph`] is a tape: every op appends a node whose inputs precede it, so
//! reverse index order is a valid topological order for the backward sweep.
//! Ops are coarse (matmul, layer norm, multi-head attention, log-softmax) so
//! tape bookkeeping stays negligible next to the arithmetic.

use super::params::{ModelParams, ParamId};
use crate::error::{Error, Result};

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

const LN_EPS: f64 = 1e-5;

enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

enum Op {
    Leaf,
    Gather { table: Var, rows: Vec<usize> },
    ConcatRows(Var, Var),
    SliceRows { x: Var, start: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Min(Var, Var),
    AddBias { x: Var, bias: Var },
    Scale { x: Var, by: f64 },
    MatMul(Var, Var),
    LayerNorm { x: Var, gain: Var, bias: Var, stats: Vec<(f64, f64)> },
    Gelu(Var),
    Attention { qkv: Var, heads: usize, probs: Vec<f64> },
    LogSoftmax(Var),
    Pick { x: Var, at: Vec<(usize, usize)> },
    Exp(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Sum(Var),
}

struct Node {
    rows: usize,
    cols: usize,
    value: Value,
    op: Op,
    needs_grad: bool,
}

/// A differentiable computation over one parameter set.
pub struct Graph<'p> {
    params: &'p ModelParams,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

/// `C = alpha * A B + beta * C` on strided views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rs: usize, cs: usize, r: usize, cl: usize| (r - 1) * rs + (cl - 1) * cs;
    if k > 0 {
        assert!(last(rsa, csa, m, k) < a.len() && last(rsb, csb, k, n) < b.len());
    }
    assert!(last(rsc, csc, m, n) < c.len());
    // SAFETY: bounds of every strided view were checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

fn gelu(x: f64) -> (f64, f64) {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    let u = C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let y = 0.5 * x * (1.0 + t);
    let dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x);
    (y, dy)
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ModelParams) -> Self {
        let n = params.specs().len();
        Graph { params, nodes: Vec::with_capacity(256), param_vars: vec![None; n] }
    }

    pub fn params(&self) -> &'p ModelParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].value {
            Value::Owned(x) => x,
            Value::Param(id) => self.params.tensor(*id),
        }
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.shape(v), (1, 1));
        self.value(v)[0]
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { rows, cols, value: Value::Owned(value), op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) {
        assert_eq!(self.shape(a), self.shape(b), "{what}: shape mismatch");
    }

    /// Leaf for a parameter tensor; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let spec = self.params.spec(id);
        let (rows, cols) = (spec.rows, spec.cols);
        self.nodes.push(Node { rows, cols, value: Value::Param(id), op: Op::Leaf, needs_grad: true });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Var {
        assert_eq!(data.len(), rows * cols, "constant: wrong data length");
        self.nodes.push(Node { rows, cols, value: Value::Owned(data), op: Op::Leaf, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// Rows of `table` selected by index.
    pub fn gather(&mut self, table: Var, rows: Vec<usize>) -> Var {
        let (tr, cols) = self.shape(table);
        let t = self.value(table);
        let mut out = Vec::with_capacity(rows.len() * cols);
        for &r in &rows {
            assert!(r < tr, "gather: row {r} out of {tr}");
            out.extend_from_slice(&t[r * cols..(r + 1) * cols]);
        }
        let n = rows.len();
        self.push(n, cols, out, Op::Gather { table, rows }, &[table])
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let ((ra, ca), (rb, cb)) = (self.shape(a), self.shape(b));
        assert_eq!(ca, cb, "concat_rows: column mismatch");
        let mut out = self.value(a).to_vec();
        out.extend_from_slice(self.value(b));
        self.push(ra + rb, ca, out, Op::ConcatRows(a, b), &[a, b])
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.shape(x);
        assert!(start + len <= r, "slice_rows: out of range");
        let out = self.value(x)[start * c..(start + len) * c].to_vec();
        self.push(len, c, out, Op::SliceRows { x, start }, &[x])
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op, what: &str) -> Var {
        self.same_shape(a, b, what);
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        self.push(r, c, out, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, f64::min, Op::Min(a, b), "min")
    }

    /// `x + bias` with a 1 x cols bias broadcast over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(bias), (1, c), "add_bias: bias must be 1 x {c}");
        let b = self.value(bias);
        let out = self.value(x).chunks(c).flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y)).collect();
        self.push(r, c, out, Op::AddBias { x, bias }, &[x, bias])
    }

    pub fn scale(&mut self, x: Var, by: f64) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|v| v * by).collect();
        self.push(r, c, out, Op::Scale { x, by }, &[x])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let ((m, k), (k2, n)) = (self.shape(a), self.shape(b));
        assert_eq!(k, k2, "matmul: inner dimension mismatch");
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, 1.0, self.value(a), (k, 1), self.value(b), (n, 1), 0.0, &mut out, (n, 1));
        self.push(m, n, out, Op::MatMul(a, b), &[a, b])
    }

    /// `x W + b`.
    pub fn linear(&mut self, x: Var, w: ParamId, b: ParamId) -> Var {
        let w = self.param(w);
        let b = self.param(b);
        let y = self.matmul(x, w);
        self.add_bias(y, b)
    }

    /// Row-wise layer normalization with learned gain and bias (each 1 x cols).
    pub fn layer_norm(&mut self, x: Var, gain: ParamId, bias: ParamId) -> Var {
        let (gain, bias) = (self.param(gain), self.param(bias));
        let (r, c) = self.shape(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let mut out = Vec::with_capacity(r * c);
        let mut stats = Vec::with_capacity(r);
        for row in self.value(x).chunks(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let rstd = 1.0 / (var + LN_EPS).sqrt();
            out.extend(row.iter().enumerate().map(|(j, v)| (v - mean) * rstd * g[j] + b[j]));
            stats.push((mean, rstd));
        }
        self.push(r, c, out, Op::LayerNorm { x, gain, bias, stats }, &[x, gain, bias])
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|&v| gelu(v).0).collect();
        self.push(r, c, out, Op::Gelu(x), &[x])
    }

    /// Bidirectional multi-head self-attention. `qkv` is `seq x 3d` holding
    /// the query, key and value projections side by side; output is `seq x d`.
    pub fn attention(&mut self, qkv: Var, heads: usize) -> Var {
        let (s, c3) = self.shape(qkv);
        assert!(c3 % (3 * heads) == 0, "attention: width not divisible by 3*heads");
        let d = c3 / 3;
        let hd = d / heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let x = self.value(qkv);
        let mut probs = vec![0.0; heads * s * s];
        let mut out = vec![0.0; s * d];
        for h in 0..heads {
            let p = &mut probs[h * s * s..(h + 1) * s * s];
            let q = &x[h * hd..];
            let k = &x[d + h * hd..];
            let v = &x[2 * d + h * hd..];
            gemm(s, hd, s, scale, q, (c3, 1), k, (1, c3), 0.0, p, (s, 1));
            for row in p.chunks_mut(s) {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for e in row.iter_mut() {
                    *e = (*e - max).exp();
                    z += *e;
                }
                row.iter_mut().for_each(|e| *e /= z);
            }
            gemm(s, s, hd, 1.0, p, (s, 1), v, (c3, 1), 0.0, &mut out[h * hd..], (d, 1));
        }
        self.push(s, d, out, Op::Attention { qkv, heads, probs }, &[qkv])
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let mut out = Vec::with_capacity(r * c);
        for row in self.value(x).chunks(c) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            out.extend(row.iter().map(|v| v - lse));
        }
        self.push(r, c, out, Op::LogSoftmax(x), &[x])
    }

    /// Column vector of `x[row, col]` for each pair in `at`.
    pub fn pick(&mut self, x: Var, at: Vec<(usize, usize)>) -> Var {
        let (r, c) = self.shape(x);
        let vals = self.value(x);
        let out = at
            .iter()
            .map(|&(i, j)| {
                assert!(i < r && j < c, "pick: ({i}, {j}) outside {r}x{c}");
                vals[i * c + j]
            })
            .collect();
        let n = at.len();
        self.push(n, 1, out, Op::Pick { x, at }, &[x])
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|v| v.exp()).collect();
        self.push(r, c, out, Op::Exp(x), &[x])
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|v| v.clamp(lo, hi)).collect();
        self.push(r, c, out, Op::Clamp { x, lo, hi }, &[x])
    }

    /// Sum of all entries, left to right, as a 1x1 node.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(x), &[x])
    }

    /// Gradient of the scalar `loss` with respect to every parameter,
    /// laid out like the flat parameter buffer.
    pub fn backward(&self, loss: Var) -> Result<Vec<f64>> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::ShapeMismatch(format!("loss must be 1x1, got {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let mut out = vec![0.0; self.params.len()];

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let (rows, cols) = (node.rows, node.cols);
            let needs = |v: Var| self.nodes[v.0].needs_grad;
            let len = |v: Var| self.nodes[v.0].rows * self.nodes[v.0].cols;
            match &node.op {
                Op::Leaf => {
                    if let Value::Param(id) = node.value {
                        let off = self.params.spec(id).offset;
                        out[off..off + dy.len()].iter_mut().zip(&dy).for_each(|(o, g)| *o += g);
                    }
                }
                Op::Gather { table, rows: idx } => {
                    if needs(*table) {
                        let g = accumulate(&mut grads[table.0], len(*table));
                        for (k, &r) in idx.iter().enumerate() {
                            for j in 0..cols {
                                g[r * cols + j] += dy[k * cols + j];
                            }
                        }
                    }
                }
                Op::ConcatRows(a, b) => {
                    let split = len(*a);
                    if needs(*a) {
                        let g = accumulate(&mut grads[a.0], split);
                        g.iter_mut().zip(&dy[..split]).for_each(|(o, d)| *o += d);
                    }
                    if needs(*b) {
                        let g = accumulate(&mut grads[b.0], dy.len() - split);
                        g.iter_mut().zip(&dy[split..]).for_each(|(o, d)| *o += d);
                    }
                }
                Op::SliceRows { x, start } => {
                    if needs(*x) {
                        let g = accumulate(&mut grads[x.0], len(*x));
                        g[start * cols..(start + rows) * cols].iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    if needs(*a) {
                        let g = accumulate(&mut grads[a.0], dy.len());
                        g.iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                    }
                    if needs(*b) {
                        let g = accumulate(&mut grads[b.0], dy.len());
                        g.iter_mut().zip(&dy).for_each(|(o, d)| *o += sign * d);
                    }
                }
                Op::Mul(a, b) => {
                    if needs(*a) {
                        let bv = self.value(*b);
                        let g = accumulate(&mut grads[a.0], dy.len());
                        for k in 0..dy.len() {
                            g[k] += dy[k] * bv[k];
                        }
                    }
                    if needs(*b) {
                        let av = self.value(*a);
                        let g = accumulate(&mut grads[b.0], dy.len());
                        for k in 0..dy.len() {
                            g[k] += dy[k] * av[k];
                        }
                    }
                }
                Op::Min(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if needs(*a) {
                        let g = accumulate(&mut grads[a.0], dy.len());
                        for k in 0..dy.len() {
                            if av[k] <= bv[k] {
                                g[k] += dy[k];
                            }
                        }
                    }
                    if needs(*b) {
                        let g = accumulate(&mut grads[b.0], dy.len());
                        for k in 0..dy.len() {
                            if av[k] > bv[k] {
                                g[k] += dy[k];
                            }
                        }
                    }
                }
                Op::AddBias { x, bias } => {
                    if needs(*x) {
                        let g = accumulate(&mut grads[x.0], dy.len());
                        g.iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                    }
                    if needs(*bias) {
                        let g = accumulate(&mut grads[bias.0], cols);
                        for row in dy.chunks(cols) {
                            g.iter_mut().zip(row).for_each(|(o, d)| *o += d);
                        }
                    }
                }
                Op::Scale { x, by } => {
                    if needs(*x) {
                        let g = accumulate(&mut grads[x.0], dy.len());
                        g.iter_mut().zip(&dy).for_each(|(o, d)| *o += by * d);
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = cols;
                    if needs(*a) {
                        // dA = dY B^T
                        let bv = self.value(*b);
                        let g = accumulate(&mut grads[a.0], m * k);
                        gemm(m, n, k, 1.0, &dy, (n, 1), bv, (1, n), 1.0, g, (k, 1));
                    }
                    if needs(*b) {
                        // dB = A^T dY
                        let av = self.value(*a);
                        let g = accumulate(&mut grads[b.0], k * n);
                        gemm(k, m, n, 1.0, av, (1, k), &dy, (n, 1), 1.0, g, (n, 1));
                    }
                }
                Op::LayerNorm { x, gain, bias, stats } => {
                    let xv = self.value(*x);
                    let gv = self.value(*gain);
                    let mut dgain = vec![0.0; cols];
                    let mut dbias = vec![0.0; cols];
                    let mut dx = vec![0.0; rows * cols];
                    for (r, &(mean, rstd)) in stats.iter().enumerate() {
                        let xr = &xv[r * cols..(r + 1) * cols];
                        let dyr = &dy[r * cols..(r + 1) * cols];
                        let mut mean_dxh = 0.0;
                        let mut mean_dxh_xh = 0.0;
                        for j in 0..cols {
                            let xh = (xr[j] - mean) * rstd;
                            let dxh = dyr[j] * gv[j];
                            dgain[j] += dyr[j] * xh;
                            dbias[j] += dyr[j];
                            mean_dxh += dxh;
                            mean_dxh_xh += dxh * xh;
                        }
                        mean_dxh /= cols as f64;
                        mean_dxh_xh /= cols as f64;
                        for j in 0..cols {
                            let xh = (xr[j] - mean) * rstd;
                            dx[r * cols + j] = rstd * (dyr[j] * gv[j] - mean_dxh - xh * mean_dxh_xh);
                        }
                    }
                    for (v, d) in [(*x, dx), (*gain, dgain), (*bias, dbias)] {
                        if needs(v) {
                            let g = accumulate(&mut grads[v.0], d.len());
                            g.iter_mut().zip(&d).for_each(|(o, d)| *o += d);
                        }
                    }
                }
                Op::Gelu(x) => {
                    if needs(*x) {
                        let xv = self.value(*x);
                        let g = accumulate(&mut grads[x.0], dy.len());
                        for k in 0..dy.len() {
                            g[k] += dy[k] * gelu(xv[k]).1;
                        }
                    }
                }
                Op::Attention { qkv, heads, probs } => {
                    if needs(*qkv) {
                        let x = self.value(*qkv);
                        let (s, c3) = self.shape(*qkv);
                        let d = c3 / 3;
                        let hd = d / heads;
                        let scale = 1.0 / (hd as f64).sqrt();
                        let mut dx = vec![0.0; s * c3];
                        let mut dp = vec![0.0; s * s];
                        for h in 0..*heads {
                            let p = &probs[h * s * s..(h + 1) * s * s];
                            let dout = &dy[h * hd..];
                            // dV = P^T dOut
                            gemm(s, s, hd, 1.0, p, (1, s), dout, (d, 1), 1.0, &mut dx[2 * d + h * hd..], (c3, 1));
                            // dP = dOut V^T
                            gemm(s, hd, s, 1.0, dout, (d, 1), &x[2 * d + h * hd..], (1, c3), 0.0, &mut dp, (s, 1));
                            // softmax backward, in place: dS = P * (dP - rowsum(dP * P))
                            for (prow, drow) in p.chunks(s).zip(dp.chunks_mut(s)) {
                                let dot: f64 = prow.iter().zip(drow.iter()).map(|(a, b)| a * b).sum();
                                drow.iter_mut().zip(prow).for_each(|(dv, pv)| *dv = pv * (*dv - dot));
                            }
                            // dQ = dS K * scale ; dK = dS^T Q * scale
                            gemm(s, s, hd, scale, &dp, (s, 1), &x[d + h * hd..], (c3, 1), 1.0, &mut dx[h * hd..], (c3, 1));
                            gemm(s, s, hd, scale, &dp, (1, s), &x[h * hd..], (c3, 1), 1.0, &mut dx[d + h * hd..], (c3, 1));
                        }
                        let g = accumulate(&mut grads[qkv.0], dx.len());
                        g.iter_mut().zip(&dx).for_each(|(o, d)| *o += d);
                    }
                }
                Op::LogSoftmax(x) => {
                    if needs(*x) {
                        let yv = self.value(Var(i));
                        let g = accumulate(&mut grads[x.0], dy.len());
                        for r in 0..rows {
                            let dyr = &dy[r * cols..(r + 1) * cols];
                            let total: f64 = dyr.iter().sum();
                            for j in 0..cols {
                                g[r * cols + j] += dyr[j] - yv[r * cols + j].exp() * total;
                            }
                        }
                    }
                }
                Op::Pick { x, at } => {
                    if needs(*x) {
                        let xc = self.nodes[x.0].cols;
                        let g = accumulate(&mut grads[x.0], len(*x));
                        for (k, &(r, c)) in at.iter().enumerate() {
                            g[r * xc + c] += dy[k];
                        }
                    }
                }
                Op::Exp(x) => {
                    if needs(*x) {
                        let yv = self.value(Var(i));
                        let g = accumulate(&mut grads[x.0], dy.len());
                        for k in 0..dy.len() {
                            g[k] += dy[k] * yv[k];
                        }
                    }
                }
                Op::Clamp { x, lo, hi } => {
                    if needs(*x) {
                        let xv = self.value(*x);
                        let g = accumulate(&mut grads[x.0], dy.len());
                        for k in 0..dy.len() {
                            if xv[k] >= *lo && xv[k] <= *hi {
                                g[k] += dy[k];
                            }
                        }
                    }
                }
                Op::Sum(x) => {
                    if needs(*x) {
                        let g = accumulate(&mut grads[x.0], len(*x));
                        g.iter_mut().for_each(|o| *o += dy[0]);
                    }
                }
            }
        }
        Ok(out)
    }
}
