//! Python bindings: skeleton schemas, clips, feature encoders, synthetic
//! data, the network and its training loop.
//!
//! Tensors cross the boundary as flat row-major lists plus a shape, so the
//! module has no NumPy dependency; `numpy.asarray(t.data).reshape(t.shape)`
//! gives an array view of the values.

use std::path::PathBuf;

use angkit::angnet::{load_checkpoint, save_checkpoint, AngNet, AngNetConfig};
use angkit::encoders::{self, parse_feature_list, Stream};
use angkit::graph::{build_adjacency, k_hop_reachability};
use angkit::io::{read_tensor_file, write_tensor_file};
use angkit::synth::{generate_synthetic, SynthSpec};
use angkit::training::{self, Sample, TrainConfig, TrainingMeta};
use angkit::verify::{end_to_end_check, primitive_checks, END_TO_END_TOL, PRIMITIVE_TOL};
use angkit::{Error, FeatureTensor as CoreTensor, Shape4};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn or_py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for angkit::Result<T> {
    fn or_py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "Topology", module = "angkit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: angkit::SkeletonTopology,
}

#[pymethods]
impl PyTopology {
    /// The built-in 25-joint Kinect v2 schema.
    #[staticmethod]
    fn kinect25() -> Self {
        PyTopology { inner: angkit::SkeletonTopology::kinect25() }
    }

    #[staticmethod]
    fn from_schema(text: &str) -> PyResult<Self> {
        Ok(PyTopology { inner: angkit::SkeletonTopology::from_schema_str(text).or_py()? })
    }

    fn schema_text(&self) -> String {
        self.inner.to_schema_string()
    }

    #[getter]
    fn num_joints(&self) -> usize {
        self.inner.num_joints()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn angle_names(&self) -> Vec<String> {
        self.inner.angle_table().iter().map(|d| d.name.clone()).collect()
    }

    /// Row `i` lists whether joint `j` is within `k` hops of joint `i`.
    fn k_hop(&self, k: usize) -> PyResult<Vec<Vec<bool>>> {
        let reach = k_hop_reachability(&build_adjacency(&self.inner), k).or_py()?;
        let v = self.inner.num_joints();
        Ok((0..v).map(|i| (0..v).map(|j| reach.get(i, j)).collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Topology(name={:?}, joints={})", self.inner.name, self.inner.num_joints())
    }
}

#[pyclass(name = "Clip", module = "angkit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyClip {
    inner: angkit::Clip,
}

#[pymethods]
impl PyClip {
    /// `coords` is `frames × joints × persons × 3`, flattened with xyz innermost.
    #[new]
    #[pyo3(signature = (frames, joints, persons, coords, label=None))]
    fn new(frames: usize, joints: usize, persons: usize, coords: Vec<f64>, label: Option<usize>) -> PyResult<Self> {
        Ok(PyClip { inner: angkit::Clip::new(frames, joints, persons, coords, label, frames).or_py()? })
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.frames(), self.inner.joints(), self.inner.persons())
    }

    #[getter]
    fn label(&self) -> Option<usize> {
        self.inner.label
    }

    #[getter]
    fn coords(&self) -> Vec<f64> {
        self.inner.coords().to_vec()
    }

    fn point(&self, t: usize, v: usize, m: usize) -> PyResult<[f64; 3]> {
        let (frames, joints, persons) = self.shape();
        if t >= frames || v >= joints || m >= persons {
            return Err(PyValueError::new_err(format!(
                "index ({t}, {v}, {m}) outside clip of shape {:?}",
                self.shape()
            )));
        }
        Ok(self.inner.point(t, v, m))
    }

    /// The same clip with every coordinate multiplied by `factor`.
    fn scaled(&self, factor: f64) -> PyResult<Self> {
        Ok(PyClip { inner: self.inner.map_points(|p| p.map(|x| factor * x)).or_py()? })
    }

    fn __repr__(&self) -> String {
        let (t, v, m) = self.shape();
        format!("Clip(frames={t}, joints={v}, persons={m}, label={:?})", self.inner.label)
    }
}

#[pyclass(name = "FeatureTensor", module = "angkit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFeatureTensor {
    inner: CoreTensor,
}

#[pymethods]
impl PyFeatureTensor {
    #[new]
    #[pyo3(signature = (shape, data, channel_names=None))]
    fn new(shape: (usize, usize, usize, usize), data: Vec<f64>, channel_names: Option<Vec<String>>) -> PyResult<Self> {
        let shape = Shape4::new(shape.0, shape.1, shape.2, shape.3);
        let names = channel_names.unwrap_or_else(|| (0..shape.c).map(|c| format!("ch{c}")).collect());
        Ok(PyFeatureTensor { inner: CoreTensor::new(shape, data, names).or_py()? })
    }

    /// Reads an `ANGK1` file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyFeatureTensor { inner: read_tensor_file(path).or_py()? })
    }

    /// Writes an `ANGK1` file (values stored as 32-bit floats) and returns its size in bytes.
    fn save(&self, path: PathBuf) -> PyResult<usize> {
        write_tensor_file(&self.inner, path).or_py()
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize, usize) {
        let s = self.inner.shape();
        (s.c, s.t, s.v, s.m)
    }

    #[getter]
    fn channel_names(&self) -> Vec<String> {
        self.inner.channel_names().to_vec()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, c: usize, t: usize, v: usize, m: usize) -> PyResult<f64> {
        self.inner.get(c, t, v, m).or_py()
    }

    fn channel(&self, c: usize) -> PyResult<Vec<f64>> {
        if c >= self.inner.shape().c {
            return Err(PyValueError::new_err(format!("channel {c} out of range")));
        }
        Ok(self.inner.channel(c).to_vec())
    }

    fn __repr__(&self) -> String {
        format!("FeatureTensor(shape={:?}, channels={:?})", self.shape(), self.inner.channel_names())
    }
}

fn parse_stream(s: &str) -> PyResult<Stream> {
    s.parse().or_py()
}

/// Encodes a clip. `features` is a comma list of `joint`, `bone`, `angular`.
#[pyfunction]
#[pyo3(signature = (clip, topology, features="joint,bone,angular", stream="static"))]
fn encode(clip: &PyClip, topology: &PyTopology, features: &str, stream: &str) -> PyResult<PyFeatureTensor> {
    let kinds = parse_feature_list(features).or_py()?;
    let inner = encoders::encode(&clip.inner, &topology.inner, &kinds, parse_stream(stream)?).or_py()?;
    Ok(PyFeatureTensor { inner })
}

/// `1 − cos θ` of the angle at `u` between the rays to `w1` and `w2`.
#[pyfunction]
fn static_angle(u: [f64; 3], w1: [f64; 3], w2: [f64; 3]) -> f64 {
    encoders::static_angle(u, w1, w2)
}

/// The two-class synthetic set (classes differ only in elbow flexion), class-major order.
#[pyfunction]
#[pyo3(signature = (n_per_class, seed=0, frames=32, noise_sigma=0.01))]
fn synthesize(n_per_class: usize, seed: u64, frames: usize, noise_sigma: f64) -> PyResult<Vec<PyClip>> {
    let spec = SynthSpec { frames, noise_sigma, ..SynthSpec::default() };
    let clips = generate_synthetic(&spec, n_per_class, seed).or_py()?;
    Ok(clips.into_iter().map(|inner| PyClip { inner }).collect())
}

#[pyclass(name = "Model", module = "angkit")]
struct PyModel {
    inner: AngNet,
    meta: TrainingMeta,
}

fn samples(xs: &[PyRef<'_, PyFeatureTensor>], labels: &[usize]) -> PyResult<Vec<Sample>> {
    if xs.len() != labels.len() {
        return Err(PyValueError::new_err(format!("{} inputs for {} labels", xs.len(), labels.len())));
    }
    Ok(xs.iter().zip(labels).map(|(x, &label)| Sample { features: x.inner.clone(), label }).collect())
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (in_channels, num_classes, topology, seed=0, scales=4, channels=(24, 48, 96)))]
    fn new(
        in_channels: usize,
        num_classes: usize,
        topology: &PyTopology,
        seed: u64,
        scales: usize,
        channels: (usize, usize, usize),
    ) -> PyResult<Self> {
        let config = AngNetConfig {
            scales,
            channels: [channels.0, channels.1, channels.2],
            seed,
            ..AngNetConfig::desk(in_channels, num_classes)
        };
        Ok(PyModel { inner: AngNet::new(config, topology.inner.clone()).or_py()?, meta: TrainingMeta::default() })
    }

    /// Loads an `ANGM1` checkpoint.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, meta) = load_checkpoint(path).or_py()?;
        Ok(PyModel { inner, meta })
    }

    fn save(&self, path: PathBuf) -> PyResult<usize> {
        save_checkpoint(path, &self.inner, &self.meta).or_py()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    #[getter]
    fn epochs_trained(&self) -> usize {
        self.meta.epoch
    }

    fn param_names(&self) -> Vec<String> {
        self.inner.params().iter().map(|p| p.name.clone()).collect()
    }

    fn logits(&self, x: &PyFeatureTensor) -> PyResult<Vec<f64>> {
        self.inner.logits(&x.inner).or_py()
    }

    fn predict_proba(&self, x: &PyFeatureTensor) -> PyResult<Vec<f64>> {
        self.inner.predict_proba(&x.inner).or_py()
    }

    fn predict(&self, x: &PyFeatureTensor) -> PyResult<usize> {
        self.inner.predict(&x.inner).or_py()
    }

    /// Fits the per-(channel, joint) input standardisation to training inputs.
    fn fit_input_norm(&mut self, xs: Vec<PyRef<'_, PyFeatureTensor>>) -> PyResult<()> {
        self.inner.fit_input_norm(xs.iter().map(|x| &x.inner)).or_py()
    }

    /// Trains up to `epochs` total epochs and returns `(epoch, lr, loss, accuracy)` per new epoch.
    #[pyo3(signature = (xs, labels, epochs, lr=0.05, momentum=0.9, decay_epochs=None, batch_size=8, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        py: Python<'_>,
        xs: Vec<PyRef<'_, PyFeatureTensor>>,
        labels: Vec<usize>,
        epochs: usize,
        lr: f64,
        momentum: f64,
        decay_epochs: Option<Vec<usize>>,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<Vec<(usize, f64, f64, f64)>> {
        let data = samples(&xs, &labels)?;
        let cfg = TrainConfig {
            base_lr: lr,
            momentum,
            epochs,
            decay_epochs: decay_epochs.unwrap_or_default(),
            batch_size,
            seed,
            ..TrainConfig::default()
        };
        let (model, meta) = (&mut self.inner, &mut self.meta);
        let records = py.detach(|| training::train(model, &data, &cfg, meta, |_| {})).or_py()?;
        Ok(records.iter().map(|r| (r.epoch, r.lr, r.loss, r.accuracy)).collect())
    }

    /// Accuracy and `confusion[true][predicted]` on labelled inputs.
    fn evaluate(&self, xs: Vec<PyRef<'_, PyFeatureTensor>>, labels: Vec<usize>) -> PyResult<(f64, Vec<Vec<usize>>)> {
        let ev = training::evaluate(&self.inner, &samples(&xs, &labels)?).or_py()?;
        Ok((ev.accuracy, ev.confusion))
    }

    fn __repr__(&self) -> String {
        let c = self.inner.config();
        format!(
            "Model(in_channels={}, classes={}, scales={}, channels={:?}, params={})",
            c.in_channels,
            c.num_classes,
            c.scales,
            c.channels,
            self.inner.num_params()
        )
    }
}

/// Mean-probability ensemble: member `i` reads `inputs[i]`.
#[pyfunction]
fn ensemble_predict(models: Vec<PyRef<'_, PyModel>>, inputs: Vec<PyRef<'_, PyFeatureTensor>>) -> PyResult<usize> {
    if models.len() != inputs.len() {
        return Err(PyValueError::new_err(format!("{} models for {} inputs", models.len(), inputs.len())));
    }
    let members: Vec<_> = models.iter().zip(&inputs).map(|(m, x)| (&m.inner, &x.inner)).collect();
    training::ensemble_predict(&members).or_py()
}

/// Finite-difference checks: `(name, max relative error, passed)` per layer and
/// for the tiny network at seeds `seed..seed+3`.
#[pyfunction]
#[pyo3(signature = (seed=0, instances=5))]
fn gradcheck(py: Python<'_>, seed: u64, instances: usize) -> PyResult<Vec<(String, f64, bool)>> {
    py.detach(|| {
        let mut out: Vec<(String, f64, bool)> = primitive_checks(seed, instances)?
            .into_iter()
            .map(|(name, r)| (name.to_string(), r.max_rel_err, r.passes(PRIMITIVE_TOL)))
            .collect();
        for s in seed..seed + 3 {
            let r = end_to_end_check(s)?;
            out.push((format!("angnet_tiny[{s}]"), r.max_rel_err, r.passes(END_TO_END_TOL)));
        }
        Ok(out)
    })
    .or_py()
}

#[pymodule]
#[pyo3(name = "angkit")]
pub fn angkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PyClip>()?;
    m.add_class::<PyFeatureTensor>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(static_angle, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_predict, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
