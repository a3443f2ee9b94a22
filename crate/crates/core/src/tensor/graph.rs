use super::conv::{self, Conv3dSpec};
use super::{broadcast_shape, broadcast_strides, for_each_broadcast, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unary {
    Neg,
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Abs,
    Relu,
    Scale(f64),
    Offset(f64),
    Clamp(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ReduceKind {
    Sum,
    Mean,
    Max,
    Min,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Unary(Unary, Var),
    Binary(Binary, Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Concat(Vec<Var>),
    Softmax { x: Var, axis: usize },
    Reduce {
        kind: ReduceKind,
        x: Var,
        axis: Option<usize>,
        /// Source flat index chosen for each output element (max/min only).
        picks: Vec<usize>,
    },
    Conv3d { x: Var, w: Var, spec: Conv3dSpec },
    AvgPool { x: Var, k: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only tape. Nodes are stored in creation order, which is a
/// topological order, so backward is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every tracked node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

/// Outer/axis/inner decomposition of a shape around one axis.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.tracked(v)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn unary(&mut self, kind: Unary, x: Var) -> Var {
        let f: Box<dyn Fn(f64) -> f64> = match kind {
            Unary::Neg => Box::new(|v| -v),
            Unary::Sigmoid => Box::new(sigmoid),
            Unary::Tanh => Box::new(f64::tanh),
            Unary::Exp => Box::new(f64::exp),
            Unary::Log => Box::new(f64::ln),
            Unary::Abs => Box::new(f64::abs),
            Unary::Relu => Box::new(|v| v.max(0.0)),
            Unary::Scale(c) => Box::new(move |v| v * c),
            Unary::Offset(c) => Box::new(move |v| v + c),
            Unary::Clamp(lo, hi) => Box::new(move |v| v.clamp(lo, hi)),
        };
        let value = self.value(x).map(f);
        let rg = self.tracked(x);
        self.push(value, Op::Unary(kind, x), rg)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary(Unary::Neg, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(Unary::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(Unary::Tanh, x)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(Unary::Exp, x)
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(Unary::Log, x)
    }

    /// Subgradient 0 at 0.
    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(Unary::Abs, x)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(Unary::Relu, x)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(Unary::Scale(c), x)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(Unary::Offset(c), x)
    }

    /// Gradient passes only where the input lies strictly inside `[lo, hi]`.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(Unary::Clamp(lo, hi), x)
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let name = match kind {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
            Binary::Div => "div",
        };
        let out_shape = broadcast_shape(ta.shape(), tb.shape())
            .ok_or_else(|| Error::shape(name, ta.shape(), tb.shape()))?;
        let f = |x: f64, y: f64| match kind {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
            Binary::Div => x / y,
        };
        let value = if ta.shape() == tb.shape() {
            ta.zip_map(tb, f)?
        } else {
            let sa = broadcast_strides(ta.shape(), &out_shape);
            let sb = broadcast_strides(tb.shape(), &out_shape);
            let mut out = Tensor::zeros(&out_shape);
            let (da, db) = (ta.data(), tb.data());
            let od = out.data_mut();
            for_each_broadcast(&out_shape, &sa, &sb, |o, ia, ib| od[o] = f(da[ia], db[ib]));
            out
        };
        let rg = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Binary(kind, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matmul_raw(self.value(a), self.value(b))?;
        let rg = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).transpose2()?;
        let rg = self.tracked(x);
        Ok(self.push(value, Op::Transpose(x), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let rg = self.tracked(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Concatenation along axis 0; trailing extents must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of nothing".into()))?;
        let tail = self.shape(*first).get(1..).unwrap_or(&[]).to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.rank() == 0 || t.shape()[1..] != tail[..] {
                return Err(Error::shape("concat", self.shape(*first), t.shape()));
            }
            lead += t.shape()[0];
            data.extend_from_slice(t.data());
        }
        let mut shape = vec![lead];
        shape.extend_from_slice(&tail);
        let value = Tensor::new(shape, data)?;
        let rg = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(value, Op::Concat(parts.to_vec()), rg))
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let t = self.value(x);
        if axis >= t.rank() {
            return Err(Error::InvalidAxis {
                op: "softmax",
                axis,
                rank: t.rank(),
            });
        }
        let value = softmax_raw(t, axis);
        let rg = self.tracked(x);
        Ok(self.push(value, Op::Softmax { x, axis }, rg))
    }

    fn reduce(&mut self, kind: ReduceKind, x: Var, axis: Option<usize>) -> Result<Var> {
        let t = self.value(x);
        let (value, picks) = match axis {
            None => {
                let (v, pick) = reduce_slice(kind, t.data().iter().copied().enumerate());
                (Tensor::scalar(v), pick.into_iter().collect())
            }
            Some(ax) => {
                if ax >= t.rank() {
                    return Err(Error::InvalidAxis {
                        op: "reduce",
                        axis: ax,
                        rank: t.rank(),
                    });
                }
                let (outer, len, inner) = split_axis(t.shape(), ax);
                let mut out = Vec::with_capacity(outer * inner);
                let mut picks = Vec::new();
                let d = t.data();
                for o in 0..outer {
                    for i in 0..inner {
                        let it = (0..len).map(|k| {
                            let idx = (o * len + k) * inner + i;
                            (idx, d[idx])
                        });
                        let (v, pick) = reduce_slice(kind, it);
                        out.push(v);
                        picks.extend(pick);
                    }
                }
                let mut shape = t.shape().to_vec();
                shape.remove(ax);
                (Tensor::new(shape, out)?, picks)
            }
        };
        let rg = self.tracked(x);
        Ok(self.push(
            value,
            Op::Reduce {
                kind,
                x,
                axis,
                picks,
            },
            rg,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        self.reduce(ReduceKind::Sum, x, None).expect("full reduction")
    }

    pub fn mean(&mut self, x: Var) -> Var {
        self.reduce(ReduceKind::Mean, x, None).expect("full reduction")
    }

    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.reduce(ReduceKind::Sum, x, Some(axis))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.reduce(ReduceKind::Mean, x, Some(axis))
    }

    /// Ties route the gradient to the lowest flat index.
    pub fn max_axis(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(ReduceKind::Max, x, axis)
    }

    /// Ties route the gradient to the lowest flat index.
    pub fn min_axis(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(ReduceKind::Min, x, axis)
    }

    /// Cross-correlation of `x: [C_in, T, H, W]` with `w: [C_out, C_in, t, k, k]`.
    pub fn conv3d(&mut self, x: Var, w: Var, spec: Conv3dSpec) -> Result<Var> {
        let value = conv::forward(self.value(x), self.value(w), &spec)?;
        let rg = self.tracked(x) || self.tracked(w);
        Ok(self.push(value, Op::Conv3d { x, w, spec }, rg))
    }

    /// Non-overlapping `k x k` spatial average pooling of `[C, T, H, W]`.
    pub fn avg_pool_spatial(&mut self, x: Var, k: usize) -> Result<Var> {
        let t = self.value(x);
        let s = t.shape();
        if s.len() != 4 || k == 0 || s[2] % k != 0 || s[3] % k != 0 {
            return Err(Error::InvalidArgument(format!(
                "avg_pool_spatial: {k}x{k} does not tile shape {s:?}"
            )));
        }
        let (c, tt, h, w) = (s[0], s[1], s[2], s[3]);
        let (ho, wo) = (h / k, w / k);
        let mut out = vec![0.0; c * tt * ho * wo];
        let d = t.data();
        let norm = 1.0 / (k * k) as f64;
        for p in 0..c * tt {
            for y in 0..h {
                for xx in 0..w {
                    out[p * ho * wo + (y / k) * wo + xx / k] += d[p * h * w + y * w + xx] * norm;
                }
            }
        }
        let value = Tensor::new(vec![c, tt, ho, wo], out)?;
        let rg = self.tracked(x);
        Ok(self.push(value, Op::AvgPool { x, k }, rg))
    }

    /// Reverse sweep from a single-element output.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        let n = self.nodes.len();
        if out.0 >= n {
            return Err(Error::InvalidArgument("backward from unknown node".into()));
        }
        if self.value(out).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar output, got shape {:?}",
                self.shape(out)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        if self.tracked(out) {
            grads[out.0] = Some(vec![1.0]);
        }
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| {
                let shape = node.value.shape().to_vec();
                match g {
                    Some(g) => Tensor::new(shape, g).map(Some),
                    None if node.requires_grad && matches!(node.op, Op::Leaf) => {
                        Ok(Some(Tensor::zeros_like_shape(&shape)))
                    }
                    None => Ok(None),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contrib: Vec<f64>) {
        if !self.tracked(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contrib) {
                    *e += c;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Unary(kind, x) => {
                let xv = self.value(*x).data();
                let yv = node.value.data();
                let contrib: Vec<f64> = g
                    .iter()
                    .zip(xv)
                    .zip(yv)
                    .map(|((&d, &xi), &yi)| {
                        d * match *kind {
                            Unary::Neg => -1.0,
                            Unary::Sigmoid => yi * (1.0 - yi),
                            Unary::Tanh => 1.0 - yi * yi,
                            Unary::Exp => yi,
                            Unary::Log => 1.0 / xi,
                            Unary::Abs => {
                                if xi > 0.0 {
                                    1.0
                                } else if xi < 0.0 {
                                    -1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::Relu => {
                                if xi > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::Scale(c) => c,
                            Unary::Offset(_) => 1.0,
                            Unary::Clamp(lo, hi) => {
                                if xi > lo && xi < hi {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                        }
                    })
                    .collect();
                self.accumulate(grads, *x, contrib);
            }
            Op::Binary(kind, a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let out_shape = node.value.shape();
                let sa = broadcast_strides(ta.shape(), out_shape);
                let sb = broadcast_strides(tb.shape(), out_shape);
                let (da, db) = (ta.data(), tb.data());
                let mut ga = self.tracked(*a).then(|| vec![0.0; ta.len()]);
                let mut gb = self.tracked(*b).then(|| vec![0.0; tb.len()]);
                for_each_broadcast(out_shape, &sa, &sb, |o, ia, ib| {
                    let d = g[o];
                    let (x, y) = (da[ia], db[ib]);
                    let (dx, dy) = match kind {
                        Binary::Add => (d, d),
                        Binary::Sub => (d, -d),
                        Binary::Mul => (d * y, d * x),
                        Binary::Div => (d / y, -d * x / (y * y)),
                    };
                    if let Some(ga) = ga.as_mut() {
                        ga[ia] += dx;
                    }
                    if let Some(gb) = gb.as_mut() {
                        gb[ib] += dy;
                    }
                });
                if let Some(ga) = ga {
                    self.accumulate(grads, *a, ga);
                }
                if let Some(gb) = gb {
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::MatMul(a, b) => {
                let gt = Tensor::new(node.value.shape().to_vec(), g.to_vec())?;
                if self.tracked(*a) {
                    let ga = matmul_raw(&gt, &self.value(*b).transpose2()?)?;
                    self.accumulate(grads, *a, ga.into_data());
                }
                if self.tracked(*b) {
                    let gb = matmul_raw(&self.value(*a).transpose2()?, &gt)?;
                    self.accumulate(grads, *b, gb.into_data());
                }
            }
            Op::Transpose(x) => {
                let gt = Tensor::new(node.value.shape().to_vec(), g.to_vec())?;
                self.accumulate(grads, *x, gt.transpose2()?.into_data());
            }
            Op::Reshape(x) => self.accumulate(grads, *x, g.to_vec()),
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    self.accumulate(grads, p, g[offset..offset + len].to_vec());
                    offset += len;
                }
            }
            Op::Softmax { x, axis } => {
                let y = &node.value;
                let (outer, len, inner) = split_axis(y.shape(), *axis);
                let yd = y.data();
                let mut gx = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |k: usize| (o * len + k) * inner + i;
                        let dot: f64 = (0..len).map(|k| g[idx(k)] * yd[idx(k)]).sum();
                        for k in 0..len {
                            gx[idx(k)] = yd[idx(k)] * (g[idx(k)] - dot);
                        }
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::Reduce {
                kind,
                x,
                axis,
                picks,
            } => {
                let tx = self.value(*x);
                let mut gx = vec![0.0; tx.len()];
                match kind {
                    ReduceKind::Max | ReduceKind::Min => {
                        for (o, &src) in picks.iter().enumerate() {
                            gx[src] += g[o];
                        }
                    }
                    ReduceKind::Sum | ReduceKind::Mean => match axis {
                        None => {
                            let d = if *kind == ReduceKind::Mean {
                                g[0] / tx.len() as f64
                            } else {
                                g[0]
                            };
                            gx.iter_mut().for_each(|v| *v = d);
                        }
                        Some(ax) => {
                            let (outer, len, inner) = split_axis(tx.shape(), *ax);
                            let norm = if *kind == ReduceKind::Mean {
                                1.0 / len as f64
                            } else {
                                1.0
                            };
                            for o in 0..outer {
                                for k in 0..len {
                                    for i in 0..inner {
                                        gx[(o * len + k) * inner + i] = g[o * inner + i] * norm;
                                    }
                                }
                            }
                        }
                    },
                }
                self.accumulate(grads, *x, gx);
            }
            Op::Conv3d { x, w, spec } => {
                let gt = Tensor::new(node.value.shape().to_vec(), g.to_vec())?;
                let (gx, gw) = conv::backward(
                    self.value(*x),
                    self.value(*w),
                    spec,
                    &gt,
                    self.tracked(*x),
                    self.tracked(*w),
                )?;
                if let Some(gx) = gx {
                    self.accumulate(grads, *x, gx.into_data());
                }
                if let Some(gw) = gw {
                    self.accumulate(grads, *w, gw.into_data());
                }
            }
            Op::AvgPool { x, k } => {
                let s = self.value(*x).shape();
                let (c, tt, h, w) = (s[0], s[1], s[2], s[3]);
                let (ho, wo) = (h / k, w / k);
                let norm = 1.0 / (k * k) as f64;
                let mut gx = vec![0.0; c * tt * h * w];
                for p in 0..c * tt {
                    for y in 0..h {
                        for xx in 0..w {
                            gx[p * h * w + y * w + xx] = g[p * ho * wo + (y / k) * wo + xx / k] * norm;
                        }
                    }
                }
                self.accumulate(grads, *x, gx);
            }
        }
        Ok(())
    }
}

impl Tensor {
    fn zeros_like_shape(shape: &[usize]) -> Tensor {
        if shape.is_empty() {
            Tensor::scalar(0.0)
        } else {
            Tensor::zeros(shape)
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn reduce_slice(kind: ReduceKind, mut it: impl Iterator<Item = (usize, f64)>) -> (f64, Option<usize>) {
    match kind {
        ReduceKind::Sum | ReduceKind::Mean => {
            let (mut s, mut n) = (0.0, 0usize);
            for (_, v) in it {
                s += v;
                n += 1;
            }
            let v = if kind == ReduceKind::Mean { s / n as f64 } else { s };
            (v, None)
        }
        ReduceKind::Max | ReduceKind::Min => {
            let (mut best_i, mut best) = it.next().expect("non-empty reduction");
            for (i, v) in it {
                let better = if kind == ReduceKind::Max { v > best } else { v < best };
                if better {
                    best = v;
                    best_i = i;
                }
            }
            (best, Some(best_i))
        }
    }
}

pub(crate) fn matmul_raw(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

pub(crate) fn softmax_raw(t: &Tensor, axis: usize) -> Tensor {
    let (outer, len, inner) = split_axis(t.shape(), axis);
    let d = t.data();
    let mut out = vec![0.0; t.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + i;
            let m = (0..len).map(|k| d[idx(k)]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for k in 0..len {
                let e = (d[idx(k)] - m).exp();
                out[idx(k)] = e;
                z += e;
            }
            for k in 0..len {
                out[idx(k)] /= z;
            }
        }
    }
    Tensor::new(t.shape().to_vec(), out).expect("same shape")
}
