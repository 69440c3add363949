//! The backbone: three spatial-temporal blocks, each a multiscale spatial
//! graph convolution followed by three multiscale temporal convolution
//! units, then global average pooling and a linear classifier. Inputs first
//! pass through a fixed per-(channel, joint) standardisation fitted on
//! training data.
//!
//! Spatial unit (`K` scales): for scale `k`, features are mixed over joints
//! with `normalized_k + mask_k`, mapped across channels by a 1×1 layer, and
//! the branch outputs are summed before a relu.
//!
//! Temporal unit (`C_out` divisible by 6): one 1×1 layer produces six groups
//! of `C_out / 6` channels. Four groups go through depthwise 3×1 convolutions
//! at the configured dilations, one is left as is, one goes through a 3×1
//! max pool. The groups are concatenated, the residual path is added and a
//! relu is applied.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::build_operators;
use crate::io::{read_bytes, read_u32};
use crate::kv::KvDoc;
use crate::nn::{Graph, NodeId, ParamRegistry, Tensor};
use crate::topology::SkeletonTopology;
use crate::training::TrainingMeta;
use crate::types::FeatureTensor;

pub const TMC_BRANCHES: usize = 6;
pub const BLOCKS: usize = 3;
pub const TMC_PER_BLOCK: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AngNetConfig {
    pub in_channels: usize,
    pub num_classes: usize,
    pub scales: usize,
    pub channels: [usize; BLOCKS],
    pub dilations: [usize; 4],
    pub seed: u64,
}

impl AngNetConfig {
    /// Desk-scale defaults: widths 24/48/96, four graph scales, dilations 1–4.
    pub fn desk(in_channels: usize, num_classes: usize) -> Self {
        AngNetConfig { in_channels, num_classes, scales: 4, channels: [24, 48, 96], dilations: [1, 2, 3, 4], seed: 0 }
    }

    pub fn validate(&self, topology: &SkeletonTopology) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.in_channels == 0 {
            return bad("in_channels must be at least 1".into());
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if self.scales == 0 {
            return bad("number of graph scales K must be at least 1".into());
        }
        let longest = topology.diameter().max(1);
        if self.scales > longest {
            return bad(format!("K={} exceeds the longest path in the skeleton ({longest})", self.scales));
        }
        if let Some(c) = self.channels.iter().find(|&&c| c == 0 || c % TMC_BRANCHES != 0) {
            return bad(format!("channel width {c} is not a positive multiple of {TMC_BRANCHES}"));
        }
        let mut d = self.dilations;
        d.sort_unstable();
        if d[0] == 0 || d.windows(2).any(|w| w[0] == w[1]) {
            return bad(format!("dilations {:?} must be distinct and at least 1", self.dilations));
        }
        Ok(())
    }

    fn to_kv(&self) -> KvDoc {
        let join = |xs: &[usize]| xs.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let mut doc = KvDoc::new();
        doc.set("in_channels", self.in_channels.to_string());
        doc.set("num_classes", self.num_classes.to_string());
        doc.set("scales", self.scales.to_string());
        doc.set("channels", join(&self.channels));
        doc.set("dilations", join(&self.dilations));
        doc.set("seed", self.seed.to_string());
        doc
    }

    fn from_kv(doc: &KvDoc) -> Result<Self> {
        fn need<T: std::str::FromStr>(doc: &KvDoc, k: &str) -> Result<T> {
            doc.parse_value(k)?.ok_or_else(|| Error::Format(format!("checkpoint config is missing `{k}`")))
        }
        fn list<const N: usize>(doc: &KvDoc, k: &str) -> Result<[usize; N]> {
            let v: Vec<usize> = doc
                .value(k)
                .ok_or_else(|| Error::Format(format!("checkpoint config is missing `{k}`")))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Format(format!("bad `{k}` entry `{t}`"))))
                .collect::<Result<_>>()?;
            v.try_into().map_err(|_| Error::Format(format!("`{k}` needs {N} values")))
        }
        Ok(AngNetConfig {
            in_channels: need(doc, "in_channels")?,
            num_classes: need(doc, "num_classes")?,
            scales: need(doc, "scales")?,
            channels: list(doc, "channels")?,
            dilations: list(doc, "dilations")?,
            seed: need(doc, "seed")?,
        })
    }

    /// Closed-form parameter count for a skeleton with `joints` joints.
    pub fn param_count(&self, joints: usize) -> usize {
        let mut total = 0;
        let mut c_in = self.in_channels;
        for &c in &self.channels {
            total += self.scales * (c * c_in + c + joints * joints);
            let tmc = c * c + c + 4 * (c / TMC_BRANCHES) * 3;
            total += TMC_PER_BLOCK * tmc;
            c_in = c;
        }
        total + c_in * self.num_classes + self.num_classes
    }
}

/// Parameter slots for one temporal unit, as indices into the registry.
#[derive(Clone, Debug)]
struct TmcSlots {
    proj_w: usize,
    proj_b: usize,
    kernels: [usize; 4],
}

#[derive(Clone, Debug)]
struct SmgcSlots {
    masks: Vec<usize>,
    weights: Vec<usize>,
    biases: Vec<usize>,
}

#[derive(Clone, Debug)]
struct BlockSlots {
    smgc: SmgcSlots,
    tmc: Vec<TmcSlots>,
}

#[derive(Clone, Debug)]
pub struct AngNet {
    config: AngNetConfig,
    topology: SkeletonTopology,
    /// Row-normalised k-hop operators, one `V×V` block per scale.
    operators: Vec<Tensor>,
    params: ParamRegistry,
    input_norm: InputNorm,
    blocks: Vec<BlockSlots>,
    fc: (usize, usize),
}

fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, (6.0 / (fan_in + fan_out) as f64).sqrt(), rng)
}

/// Smallest standard deviation used when fitting the input standardisation.
pub const NORM_STD_FLOOR: f64 = 1e-3;

/// Fixed per-(channel, joint) affine map `(x - mean) · scale` applied to the
/// input. Identity until fitted; never updated by the optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct InputNorm {
    /// `[C, V]`, row-major.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputNorm {
    pub fn identity(channels: usize, joints: usize) -> Self {
        InputNorm { mean: vec![0.0; channels * joints], scale: vec![1.0; channels * joints] }
    }

    pub fn is_identity(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0) && self.scale.iter().all(|&s| s == 1.0)
    }

    /// Mean and inverse standard deviation over samples, frames and persons.
    pub fn fit<'a>(channels: usize, joints: usize, data: impl IntoIterator<Item = &'a FeatureTensor>) -> Result<Self> {
        let mut sum = vec![0.0; channels * joints];
        let mut sq = vec![0.0; channels * joints];
        let mut count = 0usize;
        for x in data {
            let sh = x.shape();
            if sh.c != channels || sh.v != joints {
                return Err(Error::Shape(format!(
                    "expected C={channels} and V={joints}, got C={} and V={}",
                    sh.c, sh.v
                )));
            }
            let d = x.data();
            for c in 0..sh.c {
                for t in 0..sh.t {
                    for v in 0..sh.v {
                        for m in 0..sh.m {
                            let a = d[((c * sh.t + t) * sh.v + v) * sh.m + m];
                            sum[c * joints + v] += a;
                            sq[c * joints + v] += a * a;
                        }
                    }
                }
            }
            count += sh.t * sh.m;
        }
        if count == 0 {
            return Err(Error::Config("cannot fit input standardisation on an empty dataset".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale =
            sq.iter().zip(&mean).map(|(q, m)| 1.0 / (q / n - m * m).max(0.0).sqrt().max(NORM_STD_FLOOR)).collect();
        Ok(InputNorm { mean, scale })
    }

    /// Broadcasts the per-(channel, joint) vectors to a `[C,T,V,M]` shift and scale.
    fn expand(&self, shape: &[usize]) -> (Tensor, Tensor) {
        let (c_n, t_n, v_n, m_n) = (shape[0], shape[1], shape[2], shape[3]);
        let mut shift = Vec::with_capacity(c_n * t_n * v_n * m_n);
        let mut scale = Vec::with_capacity(shift.capacity());
        for c in 0..c_n {
            for _ in 0..t_n {
                for v in 0..v_n {
                    for _ in 0..m_n {
                        shift.push(-self.mean[c * v_n + v]);
                        scale.push(self.scale[c * v_n + v]);
                    }
                }
            }
        }
        (Tensor::new(shape, shift).expect("shape"), Tensor::new(shape, scale).expect("shape"))
    }
}

impl AngNet {
    pub fn new(config: AngNetConfig, topology: SkeletonTopology) -> Result<Self> {
        config.validate(&topology)?;
        let v = topology.num_joints();
        let operators = build_operators(&topology, config.scales)?
            .into_iter()
            .map(|op| Tensor::new(&[v, v], op.normalized.data().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamRegistry::new();
        let mut blocks = Vec::new();
        let mut c_in = config.in_channels;
        for (b, &c) in config.channels.iter().enumerate() {
            let mut smgc = SmgcSlots { masks: vec![], weights: vec![], biases: vec![] };
            for k in 0..config.scales {
                smgc.masks.push(params.register(format!("stb{b}.smgc.mask{k}"), Tensor::zeros(&[v, v]))?);
                smgc.weights.push(params.register(format!("stb{b}.smgc.w{k}"), glorot(&[c, c_in], c_in, c, &mut rng))?);
                smgc.biases.push(params.register(format!("stb{b}.smgc.b{k}"), Tensor::zeros(&[c]))?);
            }
            let mut tmc = Vec::new();
            for u in 0..TMC_PER_BLOCK {
                let q = c / TMC_BRANCHES;
                let p = format!("stb{b}.tmc{u}");
                let proj_w = params.register(format!("{p}.proj_w"), glorot(&[c, c], c, c, &mut rng))?;
                let proj_b = params.register(format!("{p}.proj_b"), Tensor::zeros(&[c]))?;
                let mut kernels = [0; 4];
                for (i, slot) in kernels.iter_mut().enumerate() {
                    *slot = params.register(format!("{p}.tconv{i}"), glorot(&[q, 3], 3, 3, &mut rng))?;
                }
                tmc.push(TmcSlots { proj_w, proj_b, kernels });
            }
            blocks.push(BlockSlots { smgc, tmc });
            c_in = c;
        }
        let fc_w = params.register("fc.w", glorot(&[c_in, config.num_classes], c_in, config.num_classes, &mut rng))?;
        let fc_b = params.register("fc.b", Tensor::zeros(&[config.num_classes]))?;
        let input_norm = InputNorm::identity(config.in_channels, v);
        Ok(AngNet { config, topology, operators, params, input_norm, blocks, fc: (fc_w, fc_b) })
    }

    pub fn config(&self) -> &AngNetConfig {
        &self.config
    }

    pub fn topology(&self) -> &SkeletonTopology {
        &self.topology
    }

    pub fn params(&self) -> &ParamRegistry {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamRegistry {
        &mut self.params
    }

    pub fn input_norm(&self) -> &InputNorm {
        &self.input_norm
    }

    pub fn set_input_norm(&mut self, norm: InputNorm) -> Result<()> {
        let n = self.config.in_channels * self.topology.num_joints();
        if norm.mean.len() != n || norm.scale.len() != n {
            return Err(Error::Shape(format!("input standardisation needs {n} entries per vector")));
        }
        if norm.mean.iter().chain(&norm.scale).any(|x| !x.is_finite()) {
            return Err(Error::Config("input standardisation must be finite".into()));
        }
        self.input_norm = norm;
        Ok(())
    }

    /// Fits the input standardisation to a training set.
    pub fn fit_input_norm<'a>(&mut self, data: impl IntoIterator<Item = &'a FeatureTensor>) -> Result<()> {
        let norm = InputNorm::fit(self.config.in_channels, self.topology.num_joints(), data)?;
        self.set_input_norm(norm)
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn operators(&self) -> &[Tensor] {
        &self.operators
    }

    fn smgc(&self, g: &mut Graph, p: &[NodeId], slots: &SmgcSlots, ops: &[NodeId], x: NodeId) -> Result<NodeId> {
        let pick = |ids: &[usize]| ids.iter().map(|&i| p[i]).collect::<Vec<_>>();
        smgc_forward(g, x, ops, &pick(&slots.masks), &pick(&slots.weights), &pick(&slots.biases))
    }

    fn tmc(&self, g: &mut Graph, p: &[NodeId], slots: &TmcSlots, x: NodeId) -> Result<NodeId> {
        tmc_forward(g, x, p[slots.proj_w], p[slots.proj_b], slots.kernels.map(|i| p[i]), self.config.dilations)
    }

    /// Builds the forward pass on `g` and returns the logits node.
    /// `p` holds one node per registry entry, in registry order.
    pub fn forward_graph(&self, g: &mut Graph, p: &[NodeId], x: NodeId) -> Result<NodeId> {
        let shape = g.shape(x).to_vec();
        match shape[..] {
            [c, _, v, _] if c == self.config.in_channels && v == self.topology.num_joints() => {}
            [c, _, v, _] => {
                return Err(Error::Shape(format!(
                    "expected C={} and V={}, got C={c} and V={v}",
                    self.config.in_channels,
                    self.topology.num_joints()
                )))
            }
            _ => return Err(Error::Shape(format!("expected a [C,T,V,M] input, got {shape:?}"))),
        }
        if p.len() != self.params.len() {
            return Err(Error::Graph(format!("{} parameter nodes for {} parameters", p.len(), self.params.len())));
        }
        let mut h = x;
        if !self.input_norm.is_identity() {
            let (shift, scale) = self.input_norm.expand(&shape);
            let (shift, scale) = (g.leaf(shift), g.leaf(scale));
            let centred = g.add(h, shift)?;
            h = g.mul(centred, scale)?;
        }
        let ops: Vec<NodeId> = self.operators.iter().map(|t| g.leaf(t.clone())).collect();
        for block in &self.blocks {
            h = self.smgc(g, p, &block.smgc, &ops, h)?;
            for unit in &block.tmc {
                h = self.tmc(g, p, unit, h)?;
            }
        }
        let pooled = g.global_avg_pool(h)?;
        let c = g.shape(pooled)[0];
        let row = g.reshape(pooled, &[1, c])?;
        let z = g.matmul(row, p[self.fc.0])?;
        let z = g.reshape(z, &[self.config.num_classes])?;
        g.add(z, p[self.fc.1])
    }

    fn input_leaf(g: &mut Graph, features: &FeatureTensor) -> Result<NodeId> {
        Ok(g.leaf(Tensor::new(&features.shape().dims(), features.data().to_vec())?))
    }

    pub fn logits(&self, features: &FeatureTensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let x = Self::input_leaf(&mut g, features)?;
        let z = self.forward_graph(&mut g, &p, x)?;
        Ok(g.value(z).data().to_vec())
    }

    pub fn predict_proba(&self, features: &FeatureTensor) -> Result<Vec<f64>> {
        Ok(crate::nn::softmax(&self.logits(features)?))
    }

    pub fn predict(&self, features: &FeatureTensor) -> Result<usize> {
        Ok(argmax(&self.logits(features)?))
    }

    /// Cross-entropy loss, class probabilities and per-parameter gradients for one sample.
    pub fn loss_and_grads(&self, features: &FeatureTensor, label: usize) -> Result<SampleGrad> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let x = Self::input_leaf(&mut g, features)?;
        let z = self.forward_graph(&mut g, &p, x)?;
        let loss = g.softmax_cross_entropy(z, label)?;
        g.backward(loss)?;
        Ok(SampleGrad {
            loss: g.value(loss).data()[0],
            probs: g.probs(loss).expect("loss node").to_vec(),
            grads: self.params.collect_grads(&g, &p),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SampleGrad {
    pub loss: f64,
    pub probs: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// One spatial multiscale unit on an existing graph.
///
/// For each scale `k`: `ops[k] + masks[k]` mixes joints, then the 1×1 map
/// `weights[k]` (`[C_out, C_in]`) with `biases[k]` mixes channels. The scale
/// outputs are summed and passed through a relu.
pub fn smgc_forward(
    g: &mut Graph,
    x: NodeId,
    ops: &[NodeId],
    masks: &[NodeId],
    weights: &[NodeId],
    biases: &[NodeId],
) -> Result<NodeId> {
    let k = ops.len();
    if k == 0 {
        return Err(Error::Config("number of graph scales K must be at least 1".into()));
    }
    if masks.len() != k || weights.len() != k || biases.len() != k {
        return Err(Error::Config(format!(
            "{k} operators but {} masks, {} weights and {} biases",
            masks.len(),
            weights.len(),
            biases.len()
        )));
    }
    let mut acc: Option<NodeId> = None;
    for i in 0..k {
        let a = g.add(ops[i], masks[i])?;
        let mixed = g.graph_aggregate(x, a)?;
        let y = g.conv_1x1(mixed, weights[i], biases[i])?;
        acc = Some(match acc {
            None => y,
            Some(s) => g.add(s, y)?,
        });
    }
    Ok(g.relu(acc.expect("K >= 1")))
}

/// One temporal multiscale unit on an existing graph.
///
/// `proj_w` is `[C_out, C_in]` and holds the six 1×1 branches stacked along
/// its rows; `kernels[i]` is the `[C_out/6, 3]` depthwise kernel of dilated
/// branch `i`. The residual path is the identity, so `C_out` must equal `C_in`.
pub fn tmc_forward(
    g: &mut Graph,
    x: NodeId,
    proj_w: NodeId,
    proj_b: NodeId,
    kernels: [NodeId; 4],
    dilations: [usize; 4],
) -> Result<NodeId> {
    let c_out = g.shape(proj_w)[0];
    if !c_out.is_multiple_of(TMC_BRANCHES) {
        return Err(Error::Config(format!("temporal unit width {c_out} is not divisible by {TMC_BRANCHES}")));
    }
    let q = c_out / TMC_BRANCHES;
    let y = g.conv_1x1(x, proj_w, proj_b)?;
    let mut branches = Vec::with_capacity(TMC_BRANCHES);
    for i in 0..4 {
        let s = g.slice_channels(y, i * q, q)?;
        branches.push(g.temporal_conv_3x1(s, kernels[i], dilations[i])?);
    }
    branches.push(g.slice_channels(y, 4 * q, q)?);
    let s = g.slice_channels(y, 5 * q, q)?;
    branches.push(g.temporal_maxpool_3x1(s)?);
    let cat = g.concat_channels(&branches)?;
    if g.shape(x) != g.shape(cat) {
        return Err(Error::Shape(format!(
            "identity residual needs matching shapes, got {:?} and {:?}",
            g.shape(x),
            g.shape(cat)
        )));
    }
    let sum = g.add(cat, x)?;
    Ok(g.relu(sum))
}

// ---- checkpoints --------------------------------------------------------

pub const CHECKPOINT_MAGIC: [u8; 6] = *b"ANGM1\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const MOMENTUM_PREFIX: &str = "momentum/";
const NORM_MEAN: &str = "input_norm/mean";
const NORM_SCALE: &str = "input_norm/scale";

fn put_block(out: &mut Vec<u8>, bytes: &[u8]) -> Result<()> {
    let n = u32::try_from(bytes.len()).map_err(|_| Error::Format("checkpoint block too long".into()))?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) -> Result<()> {
    put_block(out, name.as_bytes())?;
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

fn get_block<R: Read>(src: &mut R, what: &str) -> Result<String> {
    let n = read_u32(src, what)?;
    String::from_utf8(read_bytes(src, n as u64, what)?).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
}

fn get_tensor<R: Read>(src: &mut R) -> Result<(String, Tensor)> {
    let name = get_block(src, "section name")?;
    let rank = read_u32(src, "section header")? as usize;
    if rank > 4 {
        return Err(Error::Format(format!("section `{name}` has rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(src, "section header")? as usize);
    }
    let n: u64 = shape
        .iter()
        .try_fold(8u64, |acc, &d| acc.checked_mul(d as u64))
        .ok_or_else(|| Error::Format("section too large".into()))?;
    let bytes = read_bytes(src, n, "section payload")?;
    let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    Ok((name, Tensor::new(&shape, data)?))
}

/// Serialises the model, its optimizer state and training metadata.
pub fn checkpoint_bytes(model: &AngNet, meta: &TrainingMeta) -> Result<Vec<u8>> {
    // Bare graphs carry no angle table and would not load back.
    let schema = model.topology.to_schema_string();
    SkeletonTopology::from_schema_str(&schema)
        .map_err(|e| Error::Topology(format!("cannot checkpoint this skeleton: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_block(&mut out, model.config.to_kv().render().as_bytes())?;
    put_block(&mut out, schema.as_bytes())?;
    put_block(&mut out, meta.to_kv().render().as_bytes())?;
    out.extend_from_slice(&(2 * model.params.len() as u32 + 2).to_le_bytes());
    let cv = [model.config.in_channels, model.topology.num_joints()];
    put_tensor(&mut out, NORM_MEAN, &cv, &model.input_norm.mean)?;
    put_tensor(&mut out, NORM_SCALE, &cv, &model.input_norm.scale)?;
    for p in model.params.iter() {
        put_tensor(&mut out, &p.name, p.value.shape(), p.value.data())?;
    }
    for p in model.params.iter() {
        put_tensor(&mut out, &format!("{MOMENTUM_PREFIX}{}", p.name), p.value.shape(), &p.momentum)?;
    }
    Ok(out)
}

pub fn checkpoint_from_bytes<R: Read>(mut src: R) -> Result<(AngNet, TrainingMeta)> {
    let mut magic = [0u8; 6];
    src.read_exact(&mut magic).map_err(|_| Error::Format("truncated checkpoint magic".into()))?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("magic mismatch: expected ANGM1, found {magic:02x?}")));
    }
    let version = read_u32(&mut src, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("checkpoint version {version}, this build reads {CHECKPOINT_VERSION}")));
    }
    let config = AngNetConfig::from_kv(&KvDoc::parse(&get_block(&mut src, "config block")?)?)?;
    let topology = SkeletonTopology::from_schema_str(&get_block(&mut src, "schema block")?)?;
    let meta = TrainingMeta::from_kv(&KvDoc::parse(&get_block(&mut src, "metadata block")?)?)?;
    let mut model = AngNet::new(config, topology)?;
    let sections = read_u32(&mut src, "section count")? as usize;
    if sections != 2 * model.params.len() + 2 {
        return Err(Error::Format(format!("{sections} sections, expected {}", 2 * model.params.len() + 2)));
    }
    let mut norm = InputNorm::identity(model.config.in_channels, model.topology.num_joints());
    for (name, slot) in [(NORM_MEAN, &mut norm.mean), (NORM_SCALE, &mut norm.scale)] {
        let (found, t) = get_tensor(&mut src)?;
        if found != name || t.len() != slot.len() {
            return Err(Error::Format(format!(
                "expected section `{name}` with {} values, found `{found}`",
                slot.len()
            )));
        }
        *slot = t.into_data();
    }
    model.set_input_norm(norm).map_err(|e| Error::Format(e.to_string()))?;
    for _ in 0..sections - 2 {
        let (name, t) = get_tensor(&mut src)?;
        let (key, momentum) = match name.strip_prefix(MOMENTUM_PREFIX) {
            Some(k) => (k, true),
            None => (name.as_str(), false),
        };
        let p =
            model.params.get_mut(key).ok_or_else(|| Error::Format(format!("unknown parameter section `{name}`")))?;
        if t.shape() != p.value.shape() {
            return Err(Error::Format(format!(
                "section `{name}` has shape {:?}, expected {:?}",
                t.shape(),
                p.value.shape()
            )));
        }
        if momentum {
            p.momentum = t.into_data();
        } else {
            p.value = t;
        }
    }
    let mut rest = [0u8; 1];
    if src.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok((model, meta))
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &AngNet, meta: &TrainingMeta) -> Result<usize> {
    let bytes = checkpoint_bytes(model, meta)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(bytes.len())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(AngNet, TrainingMeta)> {
    checkpoint_from_bytes(std::io::BufReader::new(fs::File::open(path)?))
}
