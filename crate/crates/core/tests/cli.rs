//! End-to-end runs of the `angkit` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use angkit::archive::read_manifest;
use angkit::io::{read_tensor_file, write_skeleton_text, RawSequence};
use angkit::synth::{generate_synthetic, render_clip, Latent, SynthSpec};

fn angkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_angkit")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn capture_file(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let clip = &generate_synthetic(&SynthSpec { frames: 6, ..SynthSpec::default() }, 1, seed).unwrap()[0];
    let path = dir.join(name);
    fs::write(&path, write_skeleton_text(&RawSequence::from_clip(clip))).unwrap();
    path
}

/// Small, fast run settings shared by the training tests.
fn small_config(dir: &Path) -> PathBuf {
    write_config(dir, 3, 2, "6 6 12")
}

fn write_config(dir: &Path, epochs: usize, decay: usize, channels: &str) -> PathBuf {
    let path = dir.join("small.cfg");
    fs::write(
        &path,
        format!(
            "frames = 12\n\
             [train]\nepochs = {epochs}\nlr = 0.01\ndecay_epochs = {decay}\nbatch_size = 4\n\
             [model]\nscales = 2\nchannels = {channels}\n\
             [synth]\nn_per_class = 6\ntest_per_class = 4\n"
        ),
    )
    .unwrap();
    path
}

fn field(text: &str, key: &str) -> f64 {
    let at = text.find(key).unwrap_or_else(|| panic!("`{key}` missing in:\n{text}")) + key.len();
    text[at..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn parse_writes_one_tensor_per_capture() {
    let dir = tempfile::tempdir().unwrap();
    let f = capture_file(dir.path(), "S001C001P001R001A007.skeleton", 1);
    let out = dir.path().join("clips");
    let r = angkit(&["parse", s(&f), "--out", s(&out), "--frames", "10"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let entries = read_manifest(&out).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].label, Some(6));
    let t = read_tensor_file(out.join(&entries[0].file)).unwrap();
    assert_eq!(t.shape().dims(), [3, 10, 25, 2]);
    assert!(out.join("resolved.cfg").is_file());
}

#[test]
fn partial_parse_failure_keeps_the_good_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = capture_file(dir.path(), "a.skeleton", 1);
    let b = capture_file(dir.path(), "b.skeleton", 2);
    let bad = dir.path().join("bad.skeleton");
    fs::write(&bad, "3\n1\nnot a body header\n").unwrap();
    let out = dir.path().join("clips");
    let r = angkit(&["parse", s(&a), s(&bad), s(&b), "--out", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("bad.skeleton"));
    assert_eq!(read_manifest(&out).unwrap().len(), 2);
    let tensors =
        fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "angk"));
    assert_eq!(tensors.count(), 2);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&angkit(&["parse", "--out", s(&out)])), 1);
    assert_eq!(code(&angkit(&["encode", s(&dir.path().join("missing")), "--out", s(&out)])), 1);
    assert_eq!(code(&angkit(&["synth", "--features", "joint,elbow", "--out", s(&out)])), 1);
    assert_eq!(code(&angkit(&["synth", "--stream", "sideways", "--out", s(&out)])), 1);
    assert_eq!(code(&angkit(&["synth", "--config", s(&dir.path().join("nope.cfg")), "--out", s(&out)])), 1);
    assert_eq!(code(&angkit(&["train", s(&dir.path().join("missing")), "--out", s(&out)])), 1);
    assert_eq!(code(&angkit(&["eval", s(&out)])), 1);
}

#[test]
fn encode_channel_counts() {
    let dir = tempfile::tempdir().unwrap();
    let f = capture_file(dir.path(), "x.skeleton", 3);
    let clips = dir.path().join("clips");
    assert_eq!(code(&angkit(&["parse", s(&f), "--out", s(&clips), "--frames", "6"])), 0);
    for (features, c) in [("joint", 3), ("joint,bone,angular", 15), ("angular", 9)] {
        let out = dir.path().join(features.replace(',', "_"));
        let r = angkit(&["encode", s(&clips), "--features", features, "--out", s(&out)]);
        assert_eq!(code(&r), 0);
        let t = read_tensor_file(out.join("x.angk")).unwrap();
        assert_eq!(t.shape().c, c, "{features}");
    }
}

#[test]
fn velocity_of_a_still_clip_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { frames: 5, noise_sigma: 0.0, ..SynthSpec::default() };
    let still = still_clip(&spec);
    let path = dir.path().join("still.skeleton");
    fs::write(&path, write_skeleton_text(&RawSequence::from_clip(&still))).unwrap();
    let clips = dir.path().join("clips");
    assert_eq!(code(&angkit(&["parse", s(&path), "--out", s(&clips), "--frames", "5"])), 0);
    let out = dir.path().join("vel");
    let r =
        angkit(&["encode", s(&clips), "--features", "joint,bone,angular", "--stream", "velocity", "--out", s(&out)]);
    assert_eq!(code(&r), 0);
    let t = read_tensor_file(out.join("still.angk")).unwrap();
    assert!(t.channel_names().iter().all(|n| n.starts_with("vel_")));
    assert!(t.data().iter().all(|&x| x == 0.0));
}

/// Every frame holds the same pose.
fn still_clip(spec: &SynthSpec) -> angkit::Clip {
    let moving = render_clip(spec, 0, &[Latent::neutral()]).unwrap();
    let first: Vec<f64> = moving.coords()[..25 * 3].to_vec();
    angkit::Clip::new(spec.frames, 25, 1, first.repeat(spec.frames), None, spec.frames).unwrap()
}

#[test]
fn gradcheck_passes_and_reports_errors() {
    let dir = tempfile::tempdir().unwrap();
    let r = angkit(&["gradcheck", "--instances", "3", "--out", s(dir.path())]);
    assert_eq!(code(&r), 0);
    let report = fs::read_to_string(dir.path().join("gradcheck.txt")).unwrap();
    assert!(report.contains("max_rel_err="));
    assert!(report.lines().all(|l| l.ends_with("PASS")), "{report}");
    assert_eq!(report.lines().filter(|l| l.starts_with("angnet_tiny")).count(), 3);
}

#[test]
fn zero_learning_rate_keeps_initial_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data");
    assert_eq!(code(&angkit(&["synth", "--config", s(&cfg), "--out", s(&data)])), 0);
    let out = dir.path().join("run");
    let r = angkit(&["train", s(&data.join("train")), "--config", s(&cfg), "--lr", "0", "--out", s(&out)]);
    assert_eq!(code(&r), 0);
    let text = stdout(&r);
    assert_eq!(field(&text, "initial accuracy="), field(&text, "final accuracy="));
    assert_eq!(fs::read_to_string(out.join("model.metrics.txt")).unwrap().lines().count(), 3);
}

#[test]
fn overfit_run_scores_high_on_its_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 40, 30, "12 12 24");
    let data = dir.path().join("data");
    assert_eq!(code(&angkit(&["synth", "--config", s(&cfg), "--out", s(&data)])), 0);
    let out = dir.path().join("run");
    let train = data.join("train");
    let r = angkit(&["train", s(&train), "--config", s(&cfg), "--features", "joint,angular", "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let ev = dir.path().join("eval");
    let r = angkit(&["eval", s(&train), "--model", s(&out.join("model.angm")), "--out", s(&ev)]);
    assert_eq!(code(&r), 0);
    let acc = field(&fs::read_to_string(ev.join("eval.txt")).unwrap(), "accuracy=");
    assert!(acc >= 0.95, "training-set accuracy {acc}");
    let grid = fs::read_to_string(ev.join("confusion.txt")).unwrap();
    let total: usize = grid.split_whitespace().map(|x| x.parse::<usize>().unwrap()).sum();
    assert_eq!(total, 12);
}

#[test]
fn reruns_are_byte_identical_and_the_echo_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data");
    assert_eq!(code(&angkit(&["synth", "--config", s(&cfg), "--seed", "5", "--out", s(&data)])), 0);
    let train = data.join("train");
    let out = dir.path().join("run");
    let args = ["train", s(&train), "--config", s(&cfg), "--seed", "5", "--out", s(&out)];
    assert_eq!(code(&angkit(&args)), 0);
    let first = (fs::read(out.join("model.angm")).unwrap(), fs::read(out.join("model.metrics.txt")).unwrap());
    assert_eq!(code(&angkit(&args)), 0);
    let second = (fs::read(out.join("model.angm")).unwrap(), fs::read(out.join("model.metrics.txt")).unwrap());
    assert_eq!(first, second);

    let echo = out.join("resolved.cfg");
    let again = dir.path().join("again");
    assert_eq!(code(&angkit(&["train", s(&train), "--config", s(&echo), "--out", s(&again)])), 0);
    assert_eq!(fs::read(again.join("model.angm")).unwrap(), first.0);

    let data2 = dir.path().join("data2");
    assert_eq!(code(&angkit(&["synth", "--config", s(&cfg), "--seed", "5", "--out", s(&data2)])), 0);
    for split in ["train", "test"] {
        for e in read_manifest(&data.join(split)).unwrap() {
            assert_eq!(
                fs::read(data.join(split).join(&e.file)).unwrap(),
                fs::read(data2.join(split).join(&e.file)).unwrap()
            );
        }
    }
}

#[test]
fn resume_continues_and_checks_features() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data");
    assert_eq!(code(&angkit(&["synth", "--config", s(&cfg), "--out", s(&data)])), 0);
    let train = data.join("train");
    let full = dir.path().join("full");
    assert_eq!(code(&angkit(&["train", s(&train), "--config", s(&cfg), "--out", s(&full)])), 0);
    let half = dir.path().join("half");
    assert_eq!(code(&angkit(&["train", s(&train), "--config", s(&cfg), "--epochs", "1", "--out", s(&half)])), 0);
    let ckpt = half.join("model.angm");
    let resumed = dir.path().join("resumed");
    let r = angkit(&["train", s(&train), "--config", s(&cfg), "--resume", s(&ckpt), "--out", s(&resumed)]);
    assert_eq!(code(&r), 0);
    assert_eq!(fs::read(resumed.join("model.angm")).unwrap(), fs::read(full.join("model.angm")).unwrap());

    let r = angkit(&[
        "train",
        s(&train),
        "--config",
        s(&cfg),
        "--features",
        "angular",
        "--resume",
        s(&ckpt),
        "--out",
        s(&resumed),
    ]);
    assert_eq!(code(&r), 1);
}

#[test]
fn ensemble_train_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data");
    assert_eq!(code(&angkit(&["synth", "--config", s(&cfg), "--out", s(&data)])), 0);
    let out = dir.path().join("run");
    let r = angkit(&[
        "train",
        s(&data.join("train")),
        "--config",
        s(&cfg),
        "--features",
        "ensemble:joint,angular",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 0);
    let (a, b) = (out.join("model_joint.angm"), out.join("model_angular.angm"));
    let ev = dir.path().join("eval");
    let r = angkit(&["eval", s(&data.join("test")), "--model", s(&a), "--model", s(&b), "--out", s(&ev)]);
    assert_eq!(code(&r), 0);
    let acc = field(&fs::read_to_string(ev.join("eval.txt")).unwrap(), "accuracy=");
    assert!((0.0..=1.0).contains(&acc));
}
