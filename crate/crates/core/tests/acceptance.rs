//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The disambiguation experiment runs at a reduced size so the whole suite
//! fits in the time budget on a single core: 16 frames, 48 training and 64
//! test clips per class, widths (12, 12, 24), two graph scales, 30 epochs.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use angkit::angnet::{checkpoint_bytes, checkpoint_from_bytes, AngNet, AngNetConfig};
use angkit::encoders::{angular_features, FeatureKind, Stream, NORM_EPS};
use angkit::graph::{build_adjacency, k_hop_reachability};
use angkit::io::{parse_skeleton_file, read_tensor, write_tensor};
use angkit::nn::{softmax, Tensor};
use angkit::synth::{generate_synthetic, SynthSpec};
use angkit::training::{
    ensemble_predict, evaluate, evaluate_ensemble, lr_at, samples_from_clips, sgd_step, train, Sample, TrainConfig,
    TrainingMeta,
};
use angkit::verify::{end_to_end_check, primitive_checks, END_TO_END_TOL, PRIMITIVE_TOL};
use angkit::{AngleKind, Clip, Endpoints, FeatureTensor, Shape4, SkeletonTopology};
use common::*;
use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, RngCore};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

/// Half synthetic performers, half joints scattered uniformly in a cube.
fn random_clips(n: usize, r: &mut impl Rng) -> Vec<Clip> {
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                let spec = SynthSpec { frames: 12, persons: 1 + i % 3 / 2, ..SynthSpec::default() };
                let all = generate_synthetic(&spec, 1, r.next_u64()).unwrap();
                all[r.random_range(0..all.len())].clone()
            } else {
                random_clip(r.random_range(1..12), 25, r.random_range(1..3), r)
            }
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn c1_angular_invariance() -> Outcome {
    let start = Instant::now();
    let topo = SkeletonTopology::kinect25();
    let mut r = rng(101);
    let (mut worst_scale, mut worst_rigid) = (0.0f64, 0.0f64);
    let (mut bounded, mut zeros) = (true, true);
    for clip in random_clips(100, &mut r) {
        let base = angular_features(&clip, &topo).unwrap();
        let s = r.random_range(0.5..=3.0);
        let scaled = angular_features(&clip.map_points(|p| p.map(|x| s * x)).unwrap(), &topo).unwrap();
        worst_scale = worst_scale.max(max_abs_diff(base.data(), scaled.data()));

        let axis = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(0.1..1.0));
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), r.random_range(-PI..PI));
        let shift = Vector3::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let moved = clip
            .map_points(|p| {
                let q = rot * Vector3::from(p) + shift;
                [q.x, q.y, q.z]
            })
            .unwrap();
        let rigid = angular_features(&moved, &topo).unwrap();
        worst_rigid = worst_rigid.max(max_abs_diff(base.data(), rigid.data()));

        bounded &= base.data().iter().all(|x| (0.0..=2.0).contains(x));
        let sh = base.shape();
        for (c, def) in topo.angle_table().iter().enumerate() {
            for &j in &def.zero_joints {
                for t in 0..sh.t {
                    for m in 0..sh.m {
                        zeros &= base.get(c, t, j, m).unwrap() == 0.0;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_scale < 1e-9 && worst_rigid < 1e-6 && bounded && zeros && within(elapsed, 10),
        format!(
            "scale max|Δ|={worst_scale:.1e} (<1e-9), rigid max|Δ|={worst_rigid:.1e} (<1e-6), range ok={bounded}, zero joints ok={zeros}, {:.2}s (<10s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// `1 − cos θ` recomputed from the angle family definitions with nalgebra vectors.
fn oracle_angle(clip: &Clip, topo: &SkeletonTopology, c: usize, t: usize, v: usize, m: usize) -> f64 {
    let def = &topo.angle_table()[c];
    if def.zero_joints.contains(&v) {
        return 0.0;
    }
    let p = |j: usize| Vector3::from(clip.point(t, j, m));
    let (vertex, a, b) = match def.kind {
        AngleKind::Local => match &def.endpoints {
            Endpoints::Adjacent(table) => match table[v] {
                Some((a, b)) => (v, a, b),
                None => return 0.0,
            },
            other => panic!("local angle with endpoints {other:?}"),
        },
        AngleKind::CenterUnfixed => (v, topo.neck(), topo.pelvis()),
        AngleKind::CenterFixed => (topo.pelvis(), topo.neck(), v),
        AngleKind::Pair | AngleKind::Finger => match def.endpoints {
            Endpoints::Fixed(a, b) => (v, a, b),
            ref other => panic!("pair angle with endpoints {other:?}"),
        },
    };
    let (ra, rb) = (p(a) - p(vertex), p(b) - p(vertex));
    if ra.norm() < NORM_EPS || rb.norm() < NORM_EPS {
        return 0.0;
    }
    1.0 - (ra.dot(&rb) / (ra.norm() * rb.norm())).clamp(-1.0, 1.0)
}

fn random_tree(v: usize, r: &mut impl Rng) -> SkeletonTopology {
    let edges = (1..v).map(|i| (r.random_range(0..i), i)).collect();
    SkeletonTopology::bare_tree(v, edges).unwrap()
}

fn c2_oracles() -> Outcome {
    let start = Instant::now();
    let topo = SkeletonTopology::kinect25();
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for clip in random_clips(20, &mut r) {
        let f = angular_features(&clip, &topo).unwrap();
        let s = f.shape();
        for c in 0..s.c {
            for t in 0..s.t {
                for v in 0..s.v {
                    for m in 0..s.m {
                        let want = oracle_angle(&clip, &topo, c, t, v, m);
                        worst = worst.max((f.get(c, t, v, m).unwrap() - want).abs());
                    }
                }
            }
        }
    }
    let mut mismatched_trees = 0;
    for _ in 0..200 {
        let v = r.random_range(1..=25);
        let tree = random_tree(v, &mut r);
        let adj = build_adjacency(&tree);
        let mut ok = true;
        for k in 1..=tree.diameter() + 1 {
            let reach = k_hop_reachability(&adj, k).unwrap();
            for i in 0..v {
                let dist = tree.distances_from(i);
                ok &= (0..v).all(|j| reach.get(i, j) == (dist[j].unwrap() <= k));
            }
        }
        mismatched_trees += !ok as usize;
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-12 && mismatched_trees == 0 && within(elapsed, 30),
        format!(
            "angular vs dot-product oracle max|Δ|={worst:.1e} (<1e-12) on 20 clips, k-hop vs BFS mismatches={mismatched_trees}/200 trees, {:.2}s (<30s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn c3_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst_prim = 0.0f64;
    let mut prim_ok = true;
    for seed in 0..3 {
        for (_, rep) in primitive_checks(seed, 20).unwrap() {
            worst_prim = worst_prim.max(rep.max_rel_err);
            prim_ok &= rep.passes(PRIMITIVE_TOL) && rep.checked > 0;
        }
    }
    let mut worst_e2e = 0.0f64;
    let mut e2e_ok = true;
    for seed in 0..3 {
        let rep = end_to_end_check(seed).unwrap();
        worst_e2e = worst_e2e.max(rep.max_rel_err);
        e2e_ok &= rep.passes(END_TO_END_TOL) && rep.checked > 0;
    }
    let elapsed = start.elapsed();
    outcome(
        prim_ok && e2e_ok && within(elapsed, 120),
        format!(
            "primitives max rel err={worst_prim:.1e} (<{PRIMITIVE_TOL:e}), tiny network seeds 0-2 max rel err={worst_e2e:.1e} (<{END_TO_END_TOL:e}), {:.1}s (<120s)",
            elapsed.as_secs_f64()
        ),
    )
}

const EXP_FRAMES: usize = 16;
const EXP_TRAIN_PER_CLASS: usize = 48;
const EXP_TEST_PER_CLASS: usize = 64;
const EXP_EPOCHS: usize = 30;
const EXP_SEEDS: [u64; 3] = [0, 1, 2];

struct SeedData {
    train: Vec<Clip>,
    test: Vec<Clip>,
}

fn experiment_data(seed: u64) -> SeedData {
    let spec = SynthSpec { frames: EXP_FRAMES, ..SynthSpec::default() };
    SeedData {
        train: generate_synthetic(&spec, EXP_TRAIN_PER_CLASS, seed).unwrap(),
        test: generate_synthetic(&spec, EXP_TEST_PER_CLASS, seed + 1000).unwrap(),
    }
}

/// Trains one model on `features` and returns it with its encoded test set.
fn fit(data: &SeedData, features: &[FeatureKind], seed: u64) -> (AngNet, Vec<Sample>) {
    let topo = SkeletonTopology::kinect25();
    let train_set = samples_from_clips(&data.train, &topo, features, Stream::Static).unwrap();
    let test_set = samples_from_clips(&data.test, &topo, features, Stream::Static).unwrap();
    let mut cfg = AngNetConfig::desk(train_set[0].features.shape().c, 2);
    cfg.channels = [12, 12, 24];
    cfg.scales = 2;
    cfg.seed = seed;
    let mut model = AngNet::new(cfg, topo).unwrap();
    model.fit_input_norm(train_set.iter().map(|s| &s.features)).unwrap();
    let tc = TrainConfig {
        base_lr: 0.01,
        epochs: EXP_EPOCHS,
        decay_epochs: vec![EXP_EPOCHS * 3 / 4],
        batch_size: 8,
        seed,
        ..TrainConfig::default()
    };
    train(&mut model, &train_set, &tc, &mut TrainingMeta::default(), |_| {}).unwrap();
    (model, test_set)
}

struct Trained {
    joint: (AngNet, Vec<Sample>),
    joint_angular_acc: f64,
}

fn c4_disambiguation(runs: &mut Vec<(SeedData, Trained)>) -> Outcome {
    let start = Instant::now();
    let (mut accs_j, mut accs_ja) = (Vec::new(), Vec::new());
    for &seed in &EXP_SEEDS {
        let data = experiment_data(seed);
        let joint = fit(&data, &[FeatureKind::Joint], seed);
        let ja = fit(&data, &[FeatureKind::Joint, FeatureKind::Angular], seed);
        let acc_j = evaluate(&joint.0, &joint.1).unwrap().accuracy;
        let acc_ja = evaluate(&ja.0, &ja.1).unwrap().accuracy;
        println!("    seed {seed}: joint-only {acc_j:.3}, joint+angular {acc_ja:.3}");
        accs_j.push(acc_j);
        accs_ja.push(acc_ja);
        runs.push((data, Trained { joint, joint_angular_acc: acc_ja }));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mj, mja) = (mean(&accs_j), mean(&accs_ja));
    let elapsed = start.elapsed();
    outcome(
        mja >= mj + 0.10 && mja >= 0.95 && within(elapsed, 600),
        format!(
            "mean test accuracy joint-only={mj:.3}, joint+angular={mja:.3} (≥ joint-only+0.10 and ≥0.95), {:.0}s (<600s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn c5_training_mechanics() -> Outcome {
    let cfg = TrainConfig { base_lr: 0.1, decay_epochs: vec![10, 20, 30], decay_factor: 0.1, ..TrainConfig::default() };
    let mut want = cfg.base_lr;
    let mut schedule_ok = true;
    for e in 0..40 {
        if cfg.decay_epochs.contains(&e) {
            want *= 0.1;
        }
        schedule_ok &= lr_at(e, &cfg) == want;
    }

    let mut reg = angkit::nn::ParamRegistry::new();
    reg.register("w", Tensor::from_vec(vec![0.5])).unwrap();
    let (lr, mu, g1, g2) = (0.05, 0.9, 0.3, -0.7);
    reg.get_mut("w").unwrap().grad[0] = g1;
    sgd_step(&mut reg, lr, mu).unwrap();
    reg.get_mut("w").unwrap().grad[0] = g2;
    sgd_step(&mut reg, lr, mu).unwrap();
    let b1 = g1;
    let b2 = mu * b1 + g2;
    let hand = 0.5 - lr * b1 - lr * b2;
    let momentum_ok = reg.get("w").unwrap().value.data()[0] == hand;

    let data = tiny_samples(12, Shape4::new(3, 6, 25, 1), 5);
    let tc = TrainConfig {
        epochs: 4,
        decay_epochs: vec![2],
        base_lr: 0.02,
        batch_size: 5,
        seed: 9,
        ..TrainConfig::default()
    };
    let fresh = || {
        let cfg = AngNetConfig {
            in_channels: 3,
            num_classes: 2,
            scales: 2,
            channels: [6, 6, 12],
            dilations: [1, 2, 3, 4],
            seed: 4,
        };
        let mut m = AngNet::new(cfg, SkeletonTopology::kinect25()).unwrap();
        m.fit_input_norm(data.iter().map(|s| &s.features)).unwrap();
        m
    };
    let mut full = fresh();
    let mut full_meta = TrainingMeta::default();
    train(&mut full, &data, &tc, &mut full_meta, |_| {}).unwrap();
    let mut half = fresh();
    let mut half_meta = TrainingMeta::default();
    train(&mut half, &data, &TrainConfig { epochs: 2, ..tc.clone() }, &mut half_meta, |_| {}).unwrap();
    let (mut resumed, mut meta) = checkpoint_from_bytes(&checkpoint_bytes(&half, &half_meta).unwrap()[..]).unwrap();
    train(&mut resumed, &data, &tc, &mut meta, |_| {}).unwrap();
    let resume_ok = param_bits(&resumed) == param_bits(&full)
        && momentum_bits(&resumed) == momentum_bits(&full)
        && meta == full_meta;

    outcome(
        schedule_ok && momentum_ok && resume_ok,
        format!("schedule exact={schedule_ok}, two-step momentum exact={momentum_ok}, 2+2 epoch resume bit-exact={resume_ok}"),
    )
}

fn random_tensor(r: &mut impl Rng) -> FeatureTensor {
    let shape = Shape4::new(r.random_range(1..5), r.random_range(1..9), r.random_range(1..26), r.random_range(1..3));
    let mut t = random_features(shape, r);
    let scale = 10f64.powi(r.random_range(-3..6));
    t.data_mut().iter_mut().for_each(|x| *x *= scale);
    t
}

fn c6_formats() -> Outcome {
    let mut r = rng(606);
    let mut tensor_ok = 0;
    for _ in 0..100 {
        let t = random_tensor(&mut r);
        let mut a = Vec::new();
        write_tensor(&t, &mut a).unwrap();
        let mut b = Vec::new();
        write_tensor(&read_tensor(&a[..]).unwrap(), &mut b).unwrap();
        tensor_ok += (a == b) as usize;
    }
    let mut ckpt_ok = 0;
    let topo = SkeletonTopology::kinect25();
    for i in 0..100 {
        let cfg = AngNetConfig {
            in_channels: r.random_range(1..8),
            num_classes: r.random_range(2..6),
            scales: r.random_range(1..4),
            channels: [6, 6 * r.random_range(1..3), 12],
            dilations: [1, 2, 3, 4],
            seed: r.next_u64(),
        };
        let mut model = AngNet::new(cfg, topo.clone()).unwrap();
        for p in model.params_mut().iter_mut() {
            p.value = Tensor::uniform(p.value.shape(), 1.0, &mut r);
            p.momentum.iter_mut().for_each(|m| *m = r.random_range(-1.0..1.0));
        }
        if i % 2 == 0 {
            let shape = Shape4::new(model.config().in_channels, 4, 25, 1);
            let xs: Vec<_> = (0..3).map(|_| random_features(shape, &mut r)).collect();
            model.fit_input_norm(&xs).unwrap();
        }
        let meta = TrainingMeta { epoch: r.random_range(0..100), seed: r.next_u64(), ..TrainingMeta::default() };
        let a = checkpoint_bytes(&model, &meta).unwrap();
        let (back, back_meta) = checkpoint_from_bytes(&a[..]).unwrap();
        ckpt_ok += (checkpoint_bytes(&back, &back_meta).unwrap() == a) as usize;
    }

    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    let mut structured = 0;
    for i in 0..10_000 {
        let len = r.random_range(0..512);
        let mut bytes = vec![0u8; len];
        r.fill_bytes(&mut bytes);
        // Some inputs start with a valid magic so the header paths get exercised.
        match i % 4 {
            1 if len >= 6 => bytes[..6].copy_from_slice(b"ANGK1\0"),
            2 if len >= 6 => bytes[..6].copy_from_slice(b"ANGM1\0"),
            _ => {}
        }
        let res = catch_unwind(AssertUnwindSafe(|| {
            let a = read_tensor(&bytes[..]).is_err();
            let b = checkpoint_from_bytes(&bytes[..]).is_err();
            let c = parse_skeleton_file(&bytes, &topo).is_err();
            a as usize + b as usize + c as usize
        }));
        match res {
            Ok(n) => structured += n,
            Err(_) => crashes += 1,
        }
    }
    std::panic::set_hook(default_hook);

    outcome(
        tensor_ok == 100 && ckpt_ok == 100 && crashes == 0,
        format!(
            "ANGK1 byte-identical {tensor_ok}/100, ANGM1 byte-identical {ckpt_ok}/100, fuzz 10000 inputs x 3 readers: {crashes} crashes, {structured} structured errors"
        ),
    )
}

fn c7_ensembling(runs: &[(SeedData, Trained)]) -> Outcome {
    let mut self_ok = true;
    let mut lines = Vec::new();
    let mut floor_ok = true;
    for (i, (data, trained)) in runs.iter().enumerate() {
        let seed = EXP_SEEDS[i];
        let (joint, joint_test) = &trained.joint;
        for s in joint_test {
            let p = softmax(&joint.logits(&s.features).unwrap());
            self_ok &= ensemble_predict(&[(joint, &s.features), (joint, &s.features)]).unwrap()
                == joint.predict(&s.features).unwrap();
            self_ok &= angkit::training::mean_probabilities(&[p.clone(), p.clone()]).unwrap() == p;
        }
        let ang = fit(data, &[FeatureKind::Angular], seed);
        let acc_j = evaluate(joint, joint_test).unwrap().accuracy;
        let acc_a = evaluate(&ang.0, &ang.1).unwrap().accuracy;
        let acc_e = evaluate_ensemble(&[joint, &ang.0], &[joint_test, &ang.1]).unwrap().accuracy;
        let best = acc_j.max(acc_a);
        floor_ok &= acc_e >= best - 0.02;
        println!(
            "    seed {seed}: joint-only {acc_j:.3}, angular-only {acc_a:.3}, ensemble {acc_e:.3} (joint+angular concat {:.3})",
            trained.joint_angular_acc
        );
        lines.push(format!("{acc_e:.3}≥{:.3}", best - 0.02));
    }
    outcome(
        self_ok && floor_ok,
        format!(
            "self-ensemble identical={self_ok}, joint/angular ensemble ≥ best member − 0.02 per seed: {}",
            lines.join(", ")
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    };
    report("1 angular invariance", c1_angular_invariance());
    report("2 oracle equivalence", c2_oracles());
    report("3 gradient correctness", c3_gradients());
    let mut runs = Vec::new();
    report("4 disambiguation experiment", c4_disambiguation(&mut runs));
    report("5 training mechanics", c5_training_mechanics());
    report("6 format stability", c6_formats());
    report("7 ensembling", c7_ensembling(&runs));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
