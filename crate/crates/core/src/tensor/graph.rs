use std::f64::consts::PI;
use std::ops::Range;
use std::sync::atomic::{AtomicU32, Ordering};

use super::{axis_split, Tensor};
use crate::error::{shape_err, Error, Result};

static NEXT_GRAPH_ID: AtomicU32 = AtomicU32::new(1);

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Handle to a value recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    idx: u32,
    graph: u32,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize, trans_b: bool },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Abs(usize),
    Relu(usize),
    Gelu(usize),
    Sigmoid(usize),
    Ln(usize),
    Clamp(usize, f64, f64),
    Atan2(usize, usize),
    WrapAngle(usize),
    Softmax { a: usize, axis: usize },
    LayerNorm { x: usize, gamma: usize, beta: usize, xhat: Vec<f64>, rstd: Vec<f64> },
    Sum { a: usize, axis: usize },
    Mean { a: usize, axis: usize },
    SumAll(usize),
    MeanAll(usize),
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { a: usize, axis: usize, start: usize },
    Reshape(usize),
    Transpose(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records one forward pass; operations are appended in execution order so
/// the node list is always topologically sorted.
#[derive(Debug)]
pub struct Graph {
    id: u32,
    grad_enabled: bool,
    nodes: Vec<Node>,
    leaf_grads: Vec<Option<Vec<f64>>>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::with_grad(true)
    }

    /// A graph whose leaves never require gradients; used for inference and
    /// for stop-gradient targets.
    pub fn no_grad() -> Self {
        Self::with_grad(false)
    }

    fn with_grad(grad_enabled: bool) -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            grad_enabled,
            nodes: Vec::new(),
            leaf_grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded after the first `len`, so a graph with
    /// bound parameters can be reused across forward passes. Variables
    /// created after that point must not be used again.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.leaf_grads.truncate(len);
    }

    fn idx(&self, v: Var) -> usize {
        assert_eq!(v.graph, self.id, "variable used with a foreign graph");
        v.idx as usize
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, name: &'static str) -> Result<Var> {
        if cfg!(debug_assertions) && !value.all_finite() {
            return Err(Error::NonFinite(name));
        }
        let idx = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.leaf_grads.push(None);
        Ok(Var {
            idx: idx as u32,
            graph: self.id,
        })
    }

    /// Adds an input leaf. `requires_grad` is ignored in a no-grad graph.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        let rg = requires_grad && self.grad_enabled;
        self.push(value, Op::Leaf, rg, "leaf")
            .unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.idx(v)].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Value of a one-element variable.
    pub fn item(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[self.idx(v)].requires_grad
    }

    fn rg(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    fn val(&self, i: usize) -> &Tensor {
        &self.nodes[i].value
    }

    // ---- linear algebra ------------------------------------------------

    /// `a · b` for 2-D operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ` for 2-D operands.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let (sa, sb) = (self.val(ia).shape(), self.val(ib).shape());
        if sa.len() != 2 || sb.len() != 2 {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k) = (sa[0], sa[1]);
        let (kb, n) = if trans_b { (sb[1], sb[0]) } else { (sb[0], sb[1]) };
        if k != kb {
            return Err(shape_err("matmul", sa, sb));
        }
        let mut out = vec![0.0; m * n];
        let (rsb, csb) = if trans_b { (1, k) } else { (n, 1) };
        gemm(m, k, n, self.val(ia).data(), (k, 1), self.val(ib).data(), (rsb, csb), &mut out, (n, 1));
        let rg = self.rg(&[ia, ib]);
        self.push(
            Tensor::new(vec![m, n], out)?,
            Op::MatMul { a: ia, b: ib, trans_b },
            rg,
            "matmul",
        )
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        let s = self.val(ia).shape();
        if s.len() != 2 {
            return Err(Error::Invalid(format!("transpose needs rank 2, got {s:?}")));
        }
        let (r, c) = (s[0], s[1]);
        let d = self.val(ia).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        let rg = self.rg(&[ia]);
        self.push(Tensor::new(vec![c, r], out)?, Op::Transpose(ia), rg, "transpose")
    }

    // ---- elementwise ---------------------------------------------------

    fn broadcast_check(&self, op: &'static str, ia: usize, ib: usize) -> Result<()> {
        let (sa, sb) = (self.val(ia).shape(), self.val(ib).shape());
        if sb.len() <= sa.len() && sa[sa.len() - sb.len()..] == *sb {
            Ok(())
        } else {
            Err(shape_err(op, sa, sb))
        }
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: impl FnOnce(usize, usize) -> Op,
    ) -> Result<Var> {
        let (ia, ib) = (self.idx(a), self.idx(b));
        self.broadcast_check(name, ia, ib)?;
        let bd = self.val(ib).data();
        let nb = bd.len();
        let out: Vec<f64> = self
            .val(ia)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bd[i % nb]))
            .collect();
        let shape = self.val(ia).shape().to_vec();
        let rg = self.rg(&[ia, ib]);
        self.push(Tensor::new(shape, out)?, op(ia, ib), rg, name)
    }

    /// Elementwise sum; `b` may broadcast over the leading axes of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul)
    }

    fn unary(&mut self, a: Var, name: &'static str, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let ia = self.idx(a);
        let t = self.val(ia);
        let out: Vec<f64> = t.data().iter().map(|&x| f(x)).collect();
        let shape = t.shape().to_vec();
        let rg = self.rg(&[ia]);
        self.push(Tensor::new(shape, out)?, op, rg, name)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(a, "scale", |x| x * c, Op::Scale(ia, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(a, "add_scalar", |x| x + c, Op::AddScalar(ia))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(a, "abs", f64::abs, Op::Abs(ia))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(a, "relu", |x| x.max(0.0), Op::Relu(ia))
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(
            a,
            "gelu",
            |x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()),
            Op::Gelu(ia),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(a, "sigmoid", sigmoid, Op::Sigmoid(ia))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(a, "ln", f64::ln, Op::Ln(ia))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(a, "clamp", |x| x.clamp(lo, hi), Op::Clamp(ia, lo, hi))
    }

    /// Wraps angles into `(-π, π]`; unit gradient.
    pub fn wrap_angle(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        self.unary(a, "wrap_angle", wrap_angle, Op::WrapAngle(ia))
    }

    /// Elementwise `atan2(y, x)` for same-shape operands.
    pub fn atan2(&mut self, y: Var, x: Var) -> Result<Var> {
        let (iy, ix) = (self.idx(y), self.idx(x));
        if self.val(iy).shape() != self.val(ix).shape() {
            return Err(shape_err("atan2", self.val(iy).shape(), self.val(ix).shape()));
        }
        let out: Vec<f64> = self
            .val(iy)
            .data()
            .iter()
            .zip(self.val(ix).data())
            .map(|(&a, &b)| a.atan2(b))
            .collect();
        let shape = self.val(iy).shape().to_vec();
        let rg = self.rg(&[iy, ix]);
        self.push(Tensor::new(shape, out)?, Op::Atan2(iy, ix), rg, "atan2")
    }

    // ---- normalisation -------------------------------------------------

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let ia = self.idx(a);
        let (outer, n, inner) = axis_split(self.val(ia).shape(), axis)?;
        let d = self.val(ia).data();
        let mut out = vec![0.0; d.len()];
        for o in 0..outer {
            for j in 0..inner {
                let at = |i: usize| (o * n + i) * inner + j;
                let max = (0..n).map(|i| d[at(i)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for i in 0..n {
                    let e = (d[at(i)] - max).exp();
                    out[at(i)] = e;
                    total += e;
                }
                for i in 0..n {
                    out[at(i)] /= total;
                }
            }
        }
        let shape = self.val(ia).shape().to_vec();
        let rg = self.rg(&[ia]);
        self.push(Tensor::new(shape, out)?, Op::Softmax { a: ia, axis }, rg, "softmax")
    }

    /// Layer normalisation over the last axis with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (ix, ig, ib) = (self.idx(x), self.idx(gamma), self.idx(beta));
        let shape = self.val(ix).shape().to_vec();
        let c = *shape.last().ok_or_else(|| Error::Invalid("layer_norm on scalar".into()))?;
        for &p in &[ig, ib] {
            if self.val(p).shape() != [c] {
                return Err(shape_err("layer_norm", &shape, self.val(p).shape()));
            }
        }
        let d = self.val(ix).data();
        let rows = d.len() / c;
        let (g, b) = (self.val(ig).data(), self.val(ib).data());
        let mut xhat = vec![0.0; d.len()];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; d.len()];
        for r in 0..rows {
            let row = &d[r * c..(r + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..c {
                let h = (row[j] - mean) * rs;
                xhat[r * c + j] = h;
                out[r * c + j] = h * g[j] + b[j];
            }
        }
        let rg = self.rg(&[ix, ig, ib]);
        let (xhat, rstd) = if rg { (xhat, rstd) } else { (Vec::new(), Vec::new()) };
        self.push(
            Tensor::new(shape, out)?,
            Op::LayerNorm { x: ix, gamma: ig, beta: ib, xhat, rstd },
            rg,
            "layer_norm",
        )
    }

    // ---- reductions ----------------------------------------------------

    fn reduce(&mut self, a: Var, axis: usize, mean: bool) -> Result<Var> {
        let ia = self.idx(a);
        let shape = self.val(ia).shape().to_vec();
        let (outer, n, inner) = axis_split(&shape, axis)?;
        let d = self.val(ia).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..n {
                let src = &d[(o * n + i) * inner..(o * n + i + 1) * inner];
                for (dst, s) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *dst += s;
                }
            }
        }
        if mean {
            out.iter_mut().for_each(|v| *v /= n as f64);
        }
        let mut oshape = shape;
        oshape.remove(axis);
        let rg = self.rg(&[ia]);
        let op = if mean { Op::Mean { a: ia, axis } } else { Op::Sum { a: ia, axis } };
        self.push(Tensor::new(oshape, out)?, op, rg, "reduce")
    }

    /// Sum along `axis`, removing it.
    pub fn sum(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, false)
    }

    /// Mean along `axis`, removing it.
    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, true)
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        let s = self.val(ia).data().iter().sum();
        let rg = self.rg(&[ia]);
        self.push(Tensor::scalar(s), Op::SumAll(ia), rg, "sum_all")
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a);
        let t = self.val(ia);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.rg(&[ia]);
        self.push(Tensor::scalar(s), Op::MeanAll(ia), rg, "mean_all")
    }

    // ---- structure -----------------------------------------------------

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let ids: Vec<usize> = xs.iter().map(|&v| self.idx(v)).collect();
        let first = *ids.first().ok_or_else(|| Error::Invalid("concat of nothing".into()))?;
        let base = self.val(first).shape().to_vec();
        axis_split(&base, axis)?;
        let mut total = 0;
        for &i in &ids {
            let s = self.val(i).shape();
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(shape_err("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&base, axis)?;
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &i in &ids {
                let t = self.val(i);
                let n = t.shape()[axis];
                out.extend_from_slice(&t.data()[o * n * inner..(o + 1) * n * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = self.rg(&ids);
        self.push(Tensor::new(shape, out)?, Op::Concat { inputs: ids, axis }, rg, "concat")
    }

    /// Takes `range` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, range: Range<usize>) -> Result<Var> {
        let ia = self.idx(a);
        let shape = self.val(ia).shape().to_vec();
        let (outer, n, inner) = axis_split(&shape, axis)?;
        if range.start >= range.end || range.end > n {
            return Err(Error::Invalid(format!("slice {range:?} out of bounds for extent {n}")));
        }
        let len = range.end - range.start;
        let d = self.val(ia).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&d[(o * n + range.start) * inner..(o * n + range.end) * inner]);
        }
        let mut oshape = shape;
        oshape[axis] = len;
        let rg = self.rg(&[ia]);
        self.push(
            Tensor::new(oshape, out)?,
            Op::Slice { a: ia, axis, start: range.start },
            rg,
            "slice",
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let ia = self.idx(a);
        let t = self.val(ia).clone().reshape(shape)?;
        let rg = self.rg(&[ia]);
        self.push(t, Op::Reshape(ia), rg, "reshape")
    }

    // ---- backward ------------------------------------------------------

    /// Accumulates `∂loss/∂leaf` into every gradient-requiring leaf.
    ///
    /// Calling it again without [`Graph::zero_grad`] adds to the stored
    /// leaf gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if loss.graph != self.id || loss.idx as usize >= self.nodes.len() {
            return Err(Error::Invalid("loss is not attached to this graph".into()));
        }
        let li = loss.idx as usize;
        if self.nodes[li].value.len() != 1 {
            return Err(Error::Invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[li].value.shape()
            )));
        }
        if !self.nodes[li].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; li + 1];
        grads[li] = Some(vec![1.0]);
        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                match &mut self.leaf_grads[i] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            self.backprop_node(i, &g, &mut grads);
        }
        Ok(())
    }

    /// Clears accumulated leaf gradients.
    pub fn zero_grad(&mut self) {
        self.leaf_grads.iter_mut().for_each(|g| *g = None);
    }

    /// Gradient accumulated on a leaf; zeros when nothing flowed into it.
    pub fn grad(&self, v: Var) -> Tensor {
        let i = self.idx(v);
        let shape = self.nodes[i].value.shape();
        match &self.leaf_grads[i] {
            Some(g) => Tensor::new(shape.to_vec(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let out = &nodes[i].value;
        // Adds a contribution into input `j`, allocating on first touch.
        let mut acc = |j: usize, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[j].requires_grad {
                return;
            }
            let slot = grads[j].get_or_insert_with(|| vec![0.0; nodes[j].value.len()]);
            f(slot);
        };
        match &nodes[i].op {
            Op::Leaf => unreachable!(),
            &Op::MatMul { a, b, trans_b } => {
                let (ta, tb) = (&nodes[a].value, &nodes[b].value);
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = out.shape()[1];
                // dA = G · B'ᵀ where B' is the effective right operand (k×n).
                acc(a, &mut |da| {
                    let bstr = if trans_b { (k, 1) } else { (1, n) };
                    gemm(m, n, k, g, (n, 1), tb.data(), bstr, da, (k, 1));
                });
                // dB' = Aᵀ · G, stored transposed when B was used transposed.
                acc(b, &mut |db| {
                    let cstr = if trans_b { (1, k) } else { (n, 1) };
                    gemm(k, m, n, ta.data(), (1, k), g, (n, 1), db, cstr);
                });
            }
            &Op::Add(a, b) | &Op::Sub(a, b) => {
                let sign = if matches!(nodes[i].op, Op::Sub(..)) { -1.0 } else { 1.0 };
                acc(a, &mut |da| da.iter_mut().zip(g).for_each(|(d, v)| *d += v));
                acc(b, &mut |db| {
                    let nb = db.len();
                    for (k, v) in g.iter().enumerate() {
                        db[k % nb] += sign * v;
                    }
                });
            }
            &Op::Mul(a, b) => {
                let (va, vb) = (nodes[a].value.data(), nodes[b].value.data());
                let nb = vb.len();
                acc(a, &mut |da| {
                    for (k, v) in g.iter().enumerate() {
                        da[k] += v * vb[k % nb];
                    }
                });
                acc(b, &mut |db| {
                    for (k, v) in g.iter().enumerate() {
                        db[k % nb] += v * va[k];
                    }
                });
            }
            &Op::Scale(a, c) => acc(a, &mut |da| da.iter_mut().zip(g).for_each(|(d, v)| *d += c * v)),
            &Op::AddScalar(a) | &Op::WrapAngle(a) | &Op::Reshape(a) => {
                acc(a, &mut |da| da.iter_mut().zip(g).for_each(|(d, v)| *d += v))
            }
            &Op::Abs(a) => {
                let x = nodes[a].value.data();
                acc(a, &mut |da| {
                    for k in 0..g.len() {
                        da[k] += g[k] * sign_of(x[k]);
                    }
                });
            }
            &Op::Relu(a) => {
                let x = nodes[a].value.data();
                acc(a, &mut |da| {
                    for k in 0..g.len() {
                        if x[k] > 0.0 {
                            da[k] += g[k];
                        }
                    }
                });
            }
            &Op::Gelu(a) => {
                let x = nodes[a].value.data();
                acc(a, &mut |da| {
                    for k in 0..g.len() {
                        let xv = x[k];
                        let t = (GELU_C * (xv + 0.044715 * xv * xv * xv)).tanh();
                        let dt = GELU_C * (1.0 + 3.0 * 0.044715 * xv * xv);
                        da[k] += g[k] * (0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t * t) * dt);
                    }
                });
            }
            &Op::Sigmoid(a) => {
                let y = out.data();
                acc(a, &mut |da| {
                    for k in 0..g.len() {
                        da[k] += g[k] * y[k] * (1.0 - y[k]);
                    }
                });
            }
            &Op::Ln(a) => {
                let x = nodes[a].value.data();
                acc(a, &mut |da| {
                    for k in 0..g.len() {
                        da[k] += g[k] / x[k];
                    }
                });
            }
            &Op::Clamp(a, lo, hi) => {
                let x = nodes[a].value.data();
                acc(a, &mut |da| {
                    for k in 0..g.len() {
                        if x[k] >= lo && x[k] <= hi {
                            da[k] += g[k];
                        }
                    }
                });
            }
            &Op::Atan2(y, x) => {
                let (vy, vx) = (nodes[y].value.data(), nodes[x].value.data());
                let r2 = |k: usize| {
                    let r = vy[k] * vy[k] + vx[k] * vx[k];
                    if r > 0.0 { r } else { f64::INFINITY }
                };
                acc(y, &mut |dy| {
                    for k in 0..g.len() {
                        dy[k] += g[k] * vx[k] / r2(k);
                    }
                });
                acc(x, &mut |dx| {
                    for k in 0..g.len() {
                        dx[k] -= g[k] * vy[k] / r2(k);
                    }
                });
            }
            &Op::Softmax { a, axis } => {
                let y = out.data();
                let (outer, n, inner) = axis_split(out.shape(), axis).expect("validated");
                acc(a, &mut |da| {
                    for o in 0..outer {
                        for j in 0..inner {
                            let at = |r: usize| (o * n + r) * inner + j;
                            let dot: f64 = (0..n).map(|r| g[at(r)] * y[at(r)]).sum();
                            for r in 0..n {
                                da[at(r)] += y[at(r)] * (g[at(r)] - dot);
                            }
                        }
                    }
                });
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let (x, gamma, beta) = (*x, *gamma, *beta);
                let gm = nodes[gamma].value.data();
                let c = gm.len();
                let rows = g.len() / c;
                acc(x, &mut |dx| {
                    for r in 0..rows {
                        let gy = &g[r * c..(r + 1) * c];
                        let xh = &xhat[r * c..(r + 1) * c];
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..c {
                            let t = gy[j] * gm[j];
                            m1 += t;
                            m2 += t * xh[j];
                        }
                        m1 /= c as f64;
                        m2 /= c as f64;
                        for j in 0..c {
                            dx[r * c + j] += rstd[r] * (gy[j] * gm[j] - m1 - xh[j] * m2);
                        }
                    }
                });
                acc(gamma, &mut |dg| {
                    for (k, v) in g.iter().enumerate() {
                        dg[k % c] += v * xhat[k];
                    }
                });
                acc(beta, &mut |db| {
                    for (k, v) in g.iter().enumerate() {
                        db[k % c] += v;
                    }
                });
            }
            &Op::Sum { a, axis } | &Op::Mean { a, axis } => {
                let (outer, n, inner) = axis_split(nodes[a].value.shape(), axis).expect("validated");
                let f = if matches!(nodes[i].op, Op::Mean { .. }) { 1.0 / n as f64 } else { 1.0 };
                acc(a, &mut |da| {
                    for o in 0..outer {
                        for r in 0..n {
                            for j in 0..inner {
                                da[(o * n + r) * inner + j] += f * g[o * inner + j];
                            }
                        }
                    }
                });
            }
            &Op::SumAll(a) => acc(a, &mut |da| da.iter_mut().for_each(|d| *d += g[0])),
            &Op::MeanAll(a) => {
                let f = g[0] / nodes[a].value.len() as f64;
                acc(a, &mut |da| da.iter_mut().for_each(|d| *d += f))
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = axis_split(out.shape(), *axis).expect("validated");
                let mut offset = 0;
                for &j in inputs {
                    let n = nodes[j].value.shape()[*axis];
                    acc(j, &mut |dj| {
                        for o in 0..outer {
                            let src = &g[(o * total + offset) * inner..(o * total + offset + n) * inner];
                            for (d, v) in dj[o * n * inner..(o + 1) * n * inner].iter_mut().zip(src) {
                                *d += v;
                            }
                        }
                    });
                    offset += n;
                }
            }
            &Op::Slice { a, axis, start } => {
                let (outer, n, inner) = axis_split(nodes[a].value.shape(), axis).expect("validated");
                let len = out.shape()[axis];
                acc(a, &mut |da| {
                    for o in 0..outer {
                        let dst = &mut da[(o * n + start) * inner..(o * n + start + len) * inner];
                        for (d, v) in dst.iter_mut().zip(&g[o * len * inner..(o + 1) * len * inner]) {
                            *d += v;
                        }
                    }
                });
            }
            &Op::Transpose(a) => {
                let (r, c) = (out.shape()[1], out.shape()[0]);
                acc(a, &mut |da| {
                    for p in 0..r {
                        for q in 0..c {
                            da[p * c + q] += g[q * r + p];
                        }
                    }
                });
            }
        }
    }
}

fn sign_of(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
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

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a - 2.0 * PI * ((a - PI) / (2.0 * PI)).ceil();
    // ceil can land exactly on -π through rounding
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[allow(clippy::too_many_arguments)]
/// `C += A·B` with explicit `(row, col)` strides for every operand.
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() > (m - 1) * rsc + (n - 1) * csc);
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

#[cfg(test)]
#[path = "graph_tests.rs"]
mod tests;
