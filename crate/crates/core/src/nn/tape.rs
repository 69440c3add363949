use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MulScalar(NodeId, f64),
    Relu(NodeId),
    Reshape(NodeId),
    Sum(NodeId),
    SliceChannels { x: NodeId, start: usize },
    ConcatChannels(Vec<NodeId>),
    MatMul(NodeId, NodeId),
    Conv1x1 { x: NodeId, w: NodeId, b: NodeId },
    GraphAggregate { x: NodeId, a: NodeId },
    TemporalConv { x: NodeId, w: NodeId, dilation: usize },
    TemporalMaxPool { x: NodeId, argmax: Vec<u32> },
    GlobalAvgPool(NodeId),
    SoftmaxCrossEntropy { logits: NodeId, label: usize, probs: Vec<f64> },
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::MulScalar(..) => "mul_scalar",
            Op::Relu(_) => "relu",
            Op::Reshape(_) => "reshape",
            Op::Sum(_) => "sum",
            Op::SliceChannels { .. } => "slice_channels",
            Op::ConcatChannels(_) => "concat_channels",
            Op::MatMul(..) => "matmul",
            Op::Conv1x1 { .. } => "conv_1x1",
            Op::GraphAggregate { .. } => "graph_aggregate",
            Op::TemporalConv { .. } => "temporal_conv_3x1",
            Op::TemporalMaxPool { .. } => "temporal_maxpool_3x1",
            Op::GlobalAvgPool(_) => "global_avg_pool",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
        }
    }

    fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::MulScalar(x, _) | Op::Relu(x) | Op::Reshape(x) | Op::Sum(x) | Op::GlobalAvgPool(x) => vec![*x],
            Op::SliceChannels { x, .. } | Op::TemporalMaxPool { x, .. } => vec![*x],
            Op::ConcatChannels(xs) => xs.clone(),
            Op::Conv1x1 { x, w, b } => vec![*x, *w, *b],
            Op::GraphAggregate { x, a } => vec![*x, *a],
            Op::TemporalConv { x, w, .. } => vec![*x, *w],
            Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

/// Append-only computation tape.
#[derive(Default)]
pub struct Graph {
    values: Vec<Tensor>,
    grads: Vec<Option<Vec<f64>>>,
    ops: Vec<Op>,
}

fn dims4(t: &Tensor, what: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [c, tt, v, m] => Ok([c, tt, v, m]),
        ref s => Err(Error::Shape(format!("{what} expects a rank-4 [C,T,V,M] input, got {s:?}"))),
    }
}

fn same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.values.push(value);
        self.grads.push(None);
        self.ops.push(op);
        NodeId(self.values.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.values[id.0].shape()
    }

    /// Accumulated gradient after [`Graph::backward`]; `None` if unreached.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    pub fn op_tag(&self, id: NodeId) -> &'static str {
        self.ops[id.0].tag()
    }

    pub fn parents(&self, id: NodeId) -> Vec<NodeId> {
        self.ops[id.0].parents()
    }

    /// Probabilities computed by a softmax cross-entropy node.
    pub fn probs(&self, id: NodeId) -> Option<&[f64]> {
        match &self.ops[id.0] {
            Op::SoftmaxCrossEntropy { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Hash of every branch decision taken in the forward pass (relu signs,
    /// max-pool winners). Two passes with equal signatures lie on the same
    /// smooth piece of the function.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for op in &self.ops {
            match op {
                Op::Relu(x) => {
                    for &v in self.values[x.0].data() {
                        (v > 0.0).hash(&mut h);
                    }
                }
                Op::TemporalMaxPool { argmax, .. } => argmax.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    // ---- elementwise and structural ---------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("add", va, vb)?;
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(va.shape(), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("mul", va, vb)?;
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(va.shape(), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn mul_scalar(&mut self, x: NodeId, s: f64) -> NodeId {
        let v = self.value(x);
        let t = Tensor::new(v.shape(), v.data().iter().map(|a| a * s).collect()).expect("same shape");
        self.push(t, Op::MulScalar(x, s))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let t = Tensor::new(v.shape(), v.data().iter().map(|&a| a.max(0.0)).collect()).expect("same shape");
        self.push(t, Op::Relu(x))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(x);
        let t = Tensor::new(shape, v.data().to_vec())
            .map_err(|_| Error::Shape(format!("reshape: {:?} into {shape:?}", v.shape())))?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// Sum of all entries, as a rank-0 tensor.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Channels `start..start + len` along the leading axis.
    pub fn slice_channels(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(x);
        let (c, plane) = v.split_leading();
        if v.shape().is_empty() || len == 0 || start + len > c {
            return Err(Error::Shape(format!("slice_channels {start}..{} of {:?}", start + len, v.shape())));
        }
        let mut shape = v.shape().to_vec();
        shape[0] = len;
        let t = Tensor::new(&shape, v.data()[start * plane..(start + len) * plane].to_vec())?;
        Ok(self.push(t, Op::SliceChannels { x, start }))
    }

    /// Stacks along the leading axis; trailing dims must agree.
    pub fn concat_channels(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = xs.first().ok_or_else(|| Error::Shape("concat_channels of nothing".into()))?;
        let tail = self.shape(*first).get(1..).unwrap_or(&[]).to_vec();
        let mut c = 0;
        let mut data = Vec::new();
        for &x in xs {
            let s = self.shape(x);
            if s.is_empty() || s[1..] != tail[..] {
                return Err(Error::Shape(format!("concat_channels: {:?} vs {:?}", self.shape(*first), s)));
            }
            c += s[0];
            data.extend_from_slice(self.value(x).data());
        }
        let mut shape = vec![c];
        shape.extend(tail);
        let t = Tensor::new(&shape, data)?;
        Ok(self.push(t, Op::ConcatChannels(xs.to_vec())))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        let (n, k, m) = match (va.shape(), vb.shape()) {
            (&[n, k], &[k2, m]) if k == k2 => (n, k, m),
            (sa, sb) => return Err(Error::Shape(format!("matmul: {sa:?} x {sb:?}"))),
        };
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                axpy(va.data()[i * k + p], &vb.data()[p * m..(p + 1) * m], row);
            }
        }
        let t = Tensor::new(&[n, m], out)?;
        Ok(self.push(t, Op::MatMul(a, b)))
    }

    // ---- layers ------------------------------------------------------------

    /// Per-site linear map over the leading (channel) axis: `w` is `[C_out, C_in]`, `b` is `[C_out]`.
    pub fn conv_1x1(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        let (ci, plane) = vx.split_leading();
        let (co, ci2) = match *vw.shape() {
            [co, ci2] => (co, ci2),
            ref s => return Err(Error::Shape(format!("conv_1x1 weight must be [C_out, C_in], got {s:?}"))),
        };
        if vx.shape().is_empty() || ci2 != ci || vb.shape() != [co] {
            return Err(Error::Shape(format!(
                "conv_1x1: input {:?}, weight {:?}, bias {:?}",
                vx.shape(),
                vw.shape(),
                vb.shape()
            )));
        }
        let mut out = vec![0.0; co * plane];
        for o in 0..co {
            let dst = &mut out[o * plane..(o + 1) * plane];
            dst.fill(vb.data()[o]);
            for i in 0..ci {
                axpy(vw.data()[o * ci + i], &vx.data()[i * plane..(i + 1) * plane], dst);
            }
        }
        let mut shape = vx.shape().to_vec();
        shape[0] = co;
        let t = Tensor::new(&shape, out)?;
        Ok(self.push(t, Op::Conv1x1 { x, w, b }))
    }

    /// Mixes joints with a `[V, V]` operator: `out[c,t,v,m] = Σ_u a[v,u]·x[c,t,u,m]`.
    pub fn graph_aggregate(&mut self, x: NodeId, a: NodeId) -> Result<NodeId> {
        let (vx, va) = (self.value(x), self.value(a));
        let [c, t, v, m] = dims4(vx, "graph_aggregate")?;
        if va.shape() != [v, v] {
            return Err(Error::Shape(format!("graph_aggregate: operator {:?} for V={v}", va.shape())));
        }
        let (xd, ad) = (vx.data(), va.data());
        let mut out = vec![0.0; xd.len()];
        let block = v * m;
        for ct in 0..c * t {
            let src = &xd[ct * block..(ct + 1) * block];
            let dst = &mut out[ct * block..(ct + 1) * block];
            for i in 0..v {
                let d = &mut dst[i * m..(i + 1) * m];
                for u in 0..v {
                    let w = ad[i * v + u];
                    if w != 0.0 {
                        axpy(w, &src[u * m..(u + 1) * m], d);
                    }
                }
            }
        }
        let t = Tensor::new(vx.shape(), out)?;
        Ok(self.push(t, Op::GraphAggregate { x, a }))
    }

    /// Depthwise width-3 convolution along T with zero padding:
    /// `out[c,t] = Σ_i w[c,i]·x[c, t + (i−1)·dilation]`.
    pub fn temporal_conv_3x1(&mut self, x: NodeId, w: NodeId, dilation: usize) -> Result<NodeId> {
        let (vx, vw) = (self.value(x), self.value(w));
        let [c, t, v, m] = dims4(vx, "temporal_conv_3x1")?;
        if vw.shape() != [c, 3] || dilation == 0 {
            return Err(Error::Shape(format!(
                "temporal_conv_3x1: kernel {:?} for C={c}, dilation {dilation}",
                vw.shape()
            )));
        }
        let step = v * m;
        let (xd, wd) = (vx.data(), vw.data());
        let mut out = vec![0.0; xd.len()];
        for ch in 0..c {
            let base = ch * t * step;
            for tap in 0..3 {
                let k = wd[ch * 3 + tap];
                for ti in 0..t {
                    let Some(src_t) = shifted(ti, tap, dilation, t) else { continue };
                    let s = base + src_t * step;
                    let d = base + ti * step;
                    let (src, dst) = (&xd[s..s + step], &mut out[d..d + step]);
                    axpy(k, src, dst);
                }
            }
        }
        let t = Tensor::new(vx.shape(), out)?;
        Ok(self.push(t, Op::TemporalConv { x, w, dilation }))
    }

    /// Sliding max over `{t−1, t, t+1}`; taps outside the clip are ignored.
    /// Ties go to the earliest tap.
    pub fn temporal_maxpool_3x1(&mut self, x: NodeId) -> Result<NodeId> {
        let vx = self.value(x);
        let [c, t, v, m] = dims4(vx, "temporal_maxpool_3x1")?;
        let step = v * m;
        let xd = vx.data();
        let mut out = vec![0.0; xd.len()];
        let mut argmax = vec![0u32; xd.len()];
        for ch in 0..c {
            for ti in 0..t {
                let lo = ti.saturating_sub(1);
                let hi = (ti + 1).min(t - 1);
                for j in 0..step {
                    let dst = (ch * t + ti) * step + j;
                    let mut best = (ch * t + lo) * step + j;
                    for tt in lo + 1..=hi {
                        let cand = (ch * t + tt) * step + j;
                        if xd[cand] > xd[best] {
                            best = cand;
                        }
                    }
                    out[dst] = xd[best];
                    argmax[dst] = best as u32;
                }
            }
        }
        let t = Tensor::new(vx.shape(), out)?;
        Ok(self.push(t, Op::TemporalMaxPool { x, argmax }))
    }

    /// Mean over everything but the leading axis: `[C, ...] -> [C]`.
    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let vx = self.value(x);
        if vx.shape().is_empty() {
            return Err(Error::Shape("global_avg_pool of a scalar".into()));
        }
        let (c, plane) = vx.split_leading();
        let out = (0..c).map(|i| vx.data()[i * plane..(i + 1) * plane].iter().sum::<f64>() / plane as f64).collect();
        Ok(self.push(Tensor::from_vec(out), Op::GlobalAvgPool(x)))
    }

    /// `−log softmax(logits)[label]` as a rank-0 node; probabilities are kept
    /// on the node (see [`Graph::probs`]).
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, label: usize) -> Result<NodeId> {
        let v = self.value(logits);
        let k = match *v.shape() {
            [k] if k >= 2 => k,
            ref s => return Err(Error::Shape(format!("softmax_cross_entropy needs [K>=2] logits, got {s:?}"))),
        };
        if label >= k {
            return Err(Error::Bounds { axis: "class", index: label, len: k });
        }
        let probs = softmax(v.data());
        let max = v.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + v.data().iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let loss = lse - v.data()[label];
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxCrossEntropy { logits, label, probs }))
    }

    // ---- reverse pass ------------------------------------------------------

    /// Seeds `d loss / d loss = 1` and propagates in reverse tape order,
    /// accumulating into every reachable node.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Graph(format!("backward needs a scalar loss, got shape {:?}", self.shape(loss))));
        }
        self.grads.iter_mut().for_each(|g| *g = None);
        self.grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = self.grads[id].take() else { continue };
            if let Some(p) = self.ops[id].parents().into_iter().find(|p| p.0 >= id) {
                return Err(Error::Graph(format!("cycle: node {id} depends on node {}", p.0)));
            }
            propagate(&self.ops[id], &self.values, &mut self.grads, &g)?;
            self.grads[id] = Some(g);
        }
        Ok(())
    }
}

fn acc<'a>(grads: &'a mut [Option<Vec<f64>>], values: &[Tensor], id: NodeId) -> &'a mut Vec<f64> {
    let len = values[id.0].len();
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

/// Adds one node's local vector-Jacobian products into its parents' gradients.
fn propagate(op: &Op, values: &[Tensor], grads: &mut [Option<Vec<f64>>], g: &[f64]) -> Result<()> {
    let val = |id: NodeId| values[id.0].data();
    match *op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            axpy(1.0, g, acc(grads, values, a));
            axpy(1.0, g, acc(grads, values, b));
        }
        Op::Mul(a, b) => {
            let ga = acc(grads, values, a);
            for (i, gi) in g.iter().enumerate() {
                ga[i] += gi * val(b)[i];
            }
            let gb = acc(grads, values, b);
            for (i, gi) in g.iter().enumerate() {
                gb[i] += gi * val(a)[i];
            }
        }
        Op::MulScalar(x, s) => axpy(s, g, acc(grads, values, x)),
        Op::Relu(x) => {
            let gx = acc(grads, values, x);
            for (i, gi) in g.iter().enumerate() {
                if val(x)[i] > 0.0 {
                    gx[i] += gi;
                }
            }
        }
        Op::Reshape(x) => axpy(1.0, g, acc(grads, values, x)),
        Op::Sum(x) => acc(grads, values, x).iter_mut().for_each(|v| *v += g[0]),
        Op::SliceChannels { x, start } => {
            let plane = values[x.0].split_leading().1;
            let gx = acc(grads, values, x);
            axpy(1.0, g, &mut gx[start * plane..start * plane + g.len()]);
        }
        Op::ConcatChannels(ref xs) => {
            let mut off = 0;
            for &x in xs {
                let n = values[x.0].len();
                axpy(1.0, &g[off..off + n], acc(grads, values, x));
                off += n;
            }
        }
        Op::MatMul(a, b) => {
            let (n, k) = (values[a.0].shape()[0], values[a.0].shape()[1]);
            let m = values[b.0].shape()[1];
            let (va, vb) = (val(a), val(b));
            // dA = G·Bᵀ
            let ga = acc(grads, values, a);
            for i in 0..n {
                for p in 0..k {
                    ga[i * k + p] += dot(&g[i * m..(i + 1) * m], &vb[p * m..(p + 1) * m]);
                }
            }
            // dB = Aᵀ·G
            let gb = acc(grads, values, b);
            for i in 0..n {
                for p in 0..k {
                    axpy(va[i * k + p], &g[i * m..(i + 1) * m], &mut gb[p * m..(p + 1) * m]);
                }
            }
        }
        Op::Conv1x1 { x, w, b } => {
            let (ci, plane) = values[x.0].split_leading();
            let co = values[w.0].shape()[0];
            let (vx, vw) = (val(x), val(w));
            let gb = acc(grads, values, b);
            for o in 0..co {
                gb[o] += g[o * plane..(o + 1) * plane].iter().sum::<f64>();
            }
            let gw = acc(grads, values, w);
            for o in 0..co {
                for i in 0..ci {
                    gw[o * ci + i] += dot(&g[o * plane..(o + 1) * plane], &vx[i * plane..(i + 1) * plane]);
                }
            }
            let gx = acc(grads, values, x);
            for o in 0..co {
                for i in 0..ci {
                    axpy(vw[o * ci + i], &g[o * plane..(o + 1) * plane], &mut gx[i * plane..(i + 1) * plane]);
                }
            }
        }
        Op::GraphAggregate { x, a } => {
            let [c, t, v, m] = dims4(&values[x.0], "graph_aggregate")?;
            let (vx, va) = (val(x), val(a));
            let block = v * m;
            let ga = acc(grads, values, a);
            for ct in 0..c * t {
                let gs = &g[ct * block..(ct + 1) * block];
                let xs = &vx[ct * block..(ct + 1) * block];
                for i in 0..v {
                    for u in 0..v {
                        ga[i * v + u] += dot(&gs[i * m..(i + 1) * m], &xs[u * m..(u + 1) * m]);
                    }
                }
            }
            let gx = acc(grads, values, x);
            for ct in 0..c * t {
                let gs = &g[ct * block..(ct + 1) * block];
                let dst = &mut gx[ct * block..(ct + 1) * block];
                for i in 0..v {
                    for u in 0..v {
                        let w = va[i * v + u];
                        if w != 0.0 {
                            axpy(w, &gs[i * m..(i + 1) * m], &mut dst[u * m..(u + 1) * m]);
                        }
                    }
                }
            }
        }
        Op::TemporalConv { x, w, dilation } => {
            let [c, t, v, m] = dims4(&values[x.0], "temporal_conv_3x1")?;
            let step = v * m;
            let (vx, vw) = (val(x), val(w));
            let gw = acc(grads, values, w);
            for ch in 0..c {
                let base = ch * t * step;
                for tap in 0..3 {
                    for ti in 0..t {
                        let Some(src_t) = shifted(ti, tap, dilation, t) else { continue };
                        let (s, d) = (base + src_t * step, base + ti * step);
                        gw[ch * 3 + tap] += dot(&g[d..d + step], &vx[s..s + step]);
                    }
                }
            }
            let gx = acc(grads, values, x);
            for ch in 0..c {
                let base = ch * t * step;
                for tap in 0..3 {
                    let k = vw[ch * 3 + tap];
                    for ti in 0..t {
                        let Some(src_t) = shifted(ti, tap, dilation, t) else { continue };
                        let (s, d) = (base + src_t * step, base + ti * step);
                        axpy(k, &g[d..d + step], &mut gx[s..s + step]);
                    }
                }
            }
        }
        Op::TemporalMaxPool { x, ref argmax } => {
            let gx = acc(grads, values, x);
            for (i, &src) in argmax.iter().enumerate() {
                gx[src as usize] += g[i];
            }
        }
        Op::GlobalAvgPool(x) => {
            let (_, plane) = values[x.0].split_leading();
            let gx = acc(grads, values, x);
            for (ch, &gc) in g.iter().enumerate() {
                let s = gc / plane as f64;
                gx[ch * plane..(ch + 1) * plane].iter_mut().for_each(|v| *v += s);
            }
        }
        Op::SoftmaxCrossEntropy { logits, label, ref probs } => {
            let gl = acc(grads, values, logits);
            for (i, p) in probs.iter().enumerate() {
                gl[i] += g[0] * (p - if i == label { 1.0 } else { 0.0 });
            }
        }
    }
    Ok(())
}

/// Source frame for output frame `t` and kernel tap `tap ∈ {0,1,2}`.
#[inline]
fn shifted(t: usize, tap: usize, dilation: usize, len: usize) -> Option<usize> {
    let src = t as isize + (tap as isize - 1) * dilation as isize;
    (0..len as isize).contains(&src).then_some(src as usize)
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
