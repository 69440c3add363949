use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &str) -> PyResult<()> {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(angkit_py::angkit_module)(py);
        let globals = PyDict::new(py);
        globals.set_item("angkit", module)?;
        py.run(&std::ffi::CString::new(code).unwrap(), Some(&globals), None)
    })
}

#[test]
fn encodes_a_synthetic_clip() {
    run(r#"
topo = angkit.Topology.kinect25()
clip = angkit.synthesize(1, seed=3, frames=8)[0]
t = angkit.encode(clip, topo, "joint,bone,angular")
assert t.shape == (15, 8, 25, 1), t.shape
assert t.channel_names[-1] == "ang_finger_right"
assert all(0.0 <= x <= 2.0 for x in angkit.encode(clip, topo, "angular").data)
"#)
    .unwrap();
}

#[test]
fn errors_map_to_python_exceptions() {
    run(r#"
topo = angkit.Topology.kinect25()
try:
    angkit.FeatureTensor((2, 1, 1, 1), [1.0])
    raise AssertionError("length mismatch accepted")
except ValueError:
    pass
try:
    angkit.FeatureTensor.load("/nonexistent/x.angk")
    raise AssertionError("missing file accepted")
except OSError:
    pass
try:
    angkit.Topology.from_schema("not a schema")
    raise AssertionError("bad schema accepted")
except ValueError:
    pass
"#)
    .unwrap();
}

#[test]
fn model_prediction_is_consistent() {
    run(r#"
topo = angkit.Topology.kinect25()
clip = angkit.synthesize(1, seed=0, frames=6)[0]
x = angkit.encode(clip, topo, "joint")
m = angkit.Model(3, 4, topo, seed=2, scales=2, channels=(6, 6, 12))
p = m.predict_proba(x)
assert abs(sum(p) - 1.0) < 1e-12
assert m.predict(x) == max(range(4), key=lambda i: p[i])
assert m.num_params > 0 and len(m.param_names()) > 0
"#)
    .unwrap();
}
