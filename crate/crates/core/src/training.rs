//! Optimizer, learning-rate schedule, training and evaluation loops, and
//! probability-averaging ensembles.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::angnet::{argmax, AngNet};
use crate::encoders::{encode_many, parse_feature_list, FeatureKind, Stream};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::nn::{softmax, ParamRegistry};
use crate::topology::SkeletonTopology;
use crate::types::{Clip, FeatureTensor};

/// How feature families are combined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fusion {
    /// One model on the channel concatenation of the listed features.
    Concat(Vec<FeatureKind>),
    /// One model per listed feature, combined by mean probability.
    Ensemble(Vec<FeatureKind>),
}

impl Fusion {
    pub fn members(&self) -> Vec<Vec<FeatureKind>> {
        match self {
            Fusion::Concat(f) => vec![f.clone()],
            Fusion::Ensemble(f) => f.iter().map(|&k| vec![k]).collect(),
        }
    }
}

fn join_features(fs: &[FeatureKind]) -> String {
    fs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fusion::Concat(fs) => write!(f, "concat:{}", join_features(fs)),
            Fusion::Ensemble(fs) => write!(f, "ensemble:{}", join_features(fs)),
        }
    }
}

impl FromStr for Fusion {
    type Err = Error;

    /// `joint`, `concat:joint,angular` or `ensemble:joint,angular`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            Some(("concat", rest)) => Ok(Fusion::Concat(parse_feature_list(rest)?)),
            Some(("ensemble", rest)) => {
                let fs = parse_feature_list(rest)?;
                if fs.len() < 2 {
                    return Err(Error::Config(format!("an ensemble needs at least two members, got `{s}`")));
                }
                Ok(Fusion::Ensemble(fs))
            }
            Some((mode, _)) => {
                Err(Error::Config(format!("unknown fusion mode `{mode}` (expected concat or ensemble)")))
            }
            None => Ok(Fusion::Concat(parse_feature_list(s)?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub stream: Stream,
    pub fusion: Fusion,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 0.05,
            momentum: 0.9,
            epochs: 40,
            decay_epochs: vec![20, 30],
            decay_factor: 0.1,
            batch_size: 8,
            seed: 0,
            stream: Stream::Static,
            fusion: Fusion::Concat(vec![FeatureKind::Joint]),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return bad(format!("decay_factor {} must lie strictly between 0 and 1", self.decay_factor));
        }
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("decay_epochs {:?} must be strictly increasing", self.decay_epochs));
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return bad(format!("learning rate {} must be finite and non-negative", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} must lie in [0, 1)", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        Ok(())
    }
}

/// `base_lr · decay_factor^(number of decay epochs ≤ epoch)`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let n = cfg.decay_epochs.iter().filter(|&&d| d <= epoch).count();
    (0..n).fold(cfg.base_lr, |lr, _| lr * cfg.decay_factor)
}

/// Momentum SGD over every registered parameter, then clears the gradients.
/// Nothing is modified if any gradient is non-finite.
pub fn sgd_step(params: &mut ParamRegistry, lr: f64, momentum: f64) -> Result<()> {
    if let Some(p) = params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
        return Err(Error::NonFiniteGrad(p.name.clone()));
    }
    for p in params.iter_mut() {
        let value = p.value.data_mut();
        for ((v, b), g) in value.iter_mut().zip(p.momentum.iter_mut()).zip(&p.grad) {
            *b = momentum * *b + g;
            *v -= lr * *b;
        }
        p.grad.fill(0.0);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: FeatureTensor,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub accuracy: f64,
}

impl fmt::Display for EpochRecord {
    /// One metrics line: `epoch=3 lr=0.05 loss=0.41 accuracy=0.875`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={} lr={} loss={} accuracy={}", self.epoch, self.lr, self.loss, self.accuracy)
    }
}

impl FromStr for EpochRecord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut rec = EpochRecord { epoch: 0, lr: 0.0, loss: 0.0, accuracy: 0.0 };
        let mut seen = 0;
        for tok in s.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::Format(format!("bad metrics token `{tok}`")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Format(format!("bad metrics value `{tok}`")));
            match k {
                "epoch" => rec.epoch = v.parse().map_err(|_| Error::Format(format!("bad metrics value `{tok}`")))?,
                "lr" => rec.lr = num(v)?,
                "loss" => rec.loss = num(v)?,
                "accuracy" => rec.accuracy = num(v)?,
                _ => return Err(Error::Format(format!("unknown metrics field `{k}`"))),
            }
            seen += 1;
        }
        if seen != 4 {
            return Err(Error::Format(format!("metrics line needs 4 fields: `{s}`")));
        }
        Ok(rec)
    }
}

/// Encodes labelled clips into training samples.
pub fn samples_from_clips(
    clips: &[Clip],
    topology: &SkeletonTopology,
    features: &[FeatureKind],
    stream: Stream,
) -> Result<Vec<Sample>> {
    let encoded = encode_many(clips, topology, features, stream)?;
    clips
        .iter()
        .zip(encoded)
        .enumerate()
        .map(|(i, (c, features))| {
            let label = c.label.ok_or_else(|| Error::Config(format!("clip {i} has no label")))?;
            Ok(Sample { features, label })
        })
        .collect()
}

/// Training progress stored alongside checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMeta {
    /// Number of completed epochs.
    pub epoch: usize,
    pub seed: u64,
    /// Encoder selection the model was trained on.
    pub features: Vec<FeatureKind>,
    pub stream: Stream,
    pub history: Vec<EpochRecord>,
}

impl Default for TrainingMeta {
    fn default() -> Self {
        TrainingMeta { epoch: 0, seed: 0, features: vec![FeatureKind::Joint], stream: Stream::Static, history: vec![] }
    }
}

impl TrainingMeta {
    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("epoch", self.epoch.to_string());
        doc.set("seed", self.seed.to_string());
        doc.set("features", join_features(&self.features));
        doc.set("stream", self.stream.to_string());
        for (i, r) in self.history.iter().enumerate() {
            doc.set(format!("history.{i}"), r.to_string());
        }
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let epoch = doc.parse_value("epoch")?.ok_or_else(|| Error::Format("metadata is missing `epoch`".into()))?;
        let seed = doc.parse_value("seed")?.ok_or_else(|| Error::Format("metadata is missing `seed`".into()))?;
        let features = parse_feature_list(
            doc.value("features").ok_or_else(|| Error::Format("metadata is missing `features`".into()))?,
        )?;
        let stream =
            doc.value("stream").ok_or_else(|| Error::Format("metadata is missing `stream`".into()))?.parse()?;
        let mut history = Vec::new();
        for (i, (k, e)) in doc.section("history").enumerate() {
            if k != i.to_string() {
                return Err(Error::Format(format!("history entries out of order at `{k}`")));
            }
            history.push(e.value.parse()?);
        }
        Ok(TrainingMeta { epoch, seed, features, stream, history })
    }
}

/// Sample order for one epoch; depends only on `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn check_dataset(model: &AngNet, data: &[Sample]) -> Result<()> {
    let cfg = model.config();
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    for (i, s) in data.iter().enumerate() {
        let c = s.features.shape().c;
        if c != cfg.in_channels {
            return Err(Error::Shape(format!("sample {i}: expected C={}, got C={c}", cfg.in_channels)));
        }
        if s.label >= cfg.num_classes {
            return Err(Error::Config(format!("sample {i}: label {} outside {} classes", s.label, cfg.num_classes)));
        }
    }
    Ok(())
}

/// Runs epochs `meta.epoch .. cfg.epochs`, appending to `meta.history` and
/// handing each record to `on_epoch`. Resuming from a checkpoint taken after
/// epoch `e` continues exactly as an uninterrupted run would.
pub fn train(
    model: &mut AngNet,
    data: &[Sample],
    cfg: &TrainConfig,
    meta: &mut TrainingMeta,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    check_dataset(model, data)?;
    meta.seed = cfg.seed;
    let mut records = Vec::new();
    for epoch in meta.epoch..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        let order = epoch_order(data.len(), cfg.seed, epoch);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let net = &*model;
            let results: Vec<_> = batch
                .par_iter()
                .map(|&i| net.loss_and_grads(&data[i].features, data[i].label))
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            for (r, &i) in results.iter().zip(batch) {
                if !r.loss.is_finite() {
                    return Err(Error::Diverged { epoch, loss: r.loss });
                }
                loss_sum += r.loss;
                correct += (argmax(&r.probs) == data[i].label) as usize;
                model.params_mut().accumulate(&r.grads, scale)?;
            }
            sgd_step(model.params_mut(), lr, cfg.momentum)?;
        }
        let n = data.len() as f64;
        let rec = EpochRecord { epoch, lr, loss: loss_sum / n, accuracy: correct as f64 / n };
        on_epoch(&rec);
        meta.history.push(rec);
        meta.epoch = epoch + 1;
        records.push(rec);
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `None` for classes without samples.
    pub per_class: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn from_predictions(num_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for (truth, pred) in pairs {
            confusion[truth][pred] += 1;
        }
        let total: usize = confusion.iter().flatten().sum();
        let trace: usize = (0..num_classes).map(|i| confusion[i][i]).sum();
        let per_class = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect();
        let accuracy = if total == 0 { 0.0 } else { trace as f64 / total as f64 };
        Evaluation { accuracy, per_class, confusion }
    }

    /// Plain numeric grid, one row per true class.
    pub fn confusion_grid(&self) -> String {
        let mut out = String::new();
        for row in &self.confusion {
            out.push_str(&row.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn predictions(model: &AngNet, data: &[Sample]) -> Result<Vec<usize>> {
    data.par_iter().map(|s| model.predict(&s.features)).collect()
}

pub fn evaluate(model: &AngNet, data: &[Sample]) -> Result<Evaluation> {
    check_dataset(model, data)?;
    let preds = predictions(model, data)?;
    Ok(Evaluation::from_predictions(model.config().num_classes, data.iter().map(|s| s.label).zip(preds)))
}

/// Element-wise mean of probability vectors of equal length.
pub fn mean_probabilities(probs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = probs.first().ok_or_else(|| Error::Config("ensemble has no members".into()))?;
    if let Some(p) = probs.iter().find(|p| p.len() != first.len()) {
        return Err(Error::Config(format!("ensemble members disagree on class count: {} vs {}", first.len(), p.len())));
    }
    let n = probs.len() as f64;
    Ok((0..first.len()).map(|k| probs.iter().map(|p| p[k]).sum::<f64>() / n).collect())
}

/// Mean-probability ensemble; each member sees its own encoding of the sample.
pub fn ensemble_predict(members: &[(&AngNet, &FeatureTensor)]) -> Result<usize> {
    let probs = members.iter().map(|(m, x)| Ok(softmax(&m.logits(x)?))).collect::<Result<Vec<_>>>()?;
    Ok(argmax(&mean_probabilities(&probs)?))
}

/// Evaluates an ensemble where member `i` reads `datasets[i]` (same samples, same order).
pub fn evaluate_ensemble(models: &[&AngNet], datasets: &[&[Sample]]) -> Result<Evaluation> {
    if models.is_empty() || models.len() != datasets.len() {
        return Err(Error::Config(format!("{} models for {} datasets", models.len(), datasets.len())));
    }
    let n = datasets[0].len();
    if datasets.iter().any(|d| d.len() != n) {
        return Err(Error::Config("ensemble datasets differ in length".into()));
    }
    let preds = (0..n)
        .into_par_iter()
        .map(|i| {
            let members: Vec<_> = models.iter().zip(datasets).map(|(m, d)| (*m, &d[i].features)).collect();
            ensemble_predict(&members)
        })
        .collect::<Result<Vec<_>>>()?;
    let classes = models[0].config().num_classes;
    Ok(Evaluation::from_predictions(classes, datasets[0].iter().map(|s| s.label).zip(preds)))
}

/// Writes one metrics line per record.
pub fn write_metrics<W: Write>(records: &[EpochRecord], mut sink: W) -> Result<()> {
    for r in records {
        writeln!(sink, "{r}")?;
    }
    Ok(())
}
