//! Finite-difference verification suite: every tape primitive on random
//! instances, plus the whole network on a tiny configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angnet::{AngNet, AngNetConfig};
use crate::error::Result;
use crate::nn::gradcheck::{check_gradients, GradCheckReport, STEP};
use crate::nn::{Graph, NodeId, Tensor};
use crate::topology::SkeletonTopology;

pub const PRIMITIVE_TOL: f64 = 1e-4;
pub const END_TO_END_TOL: f64 = 1e-3;

/// Five joints, `0-1-2-3` with a branch `1-4`.
pub fn tiny_topology() -> SkeletonTopology {
    SkeletonTopology::bare_tree(5, vec![(0, 1), (1, 2), (2, 3), (1, 4)]).expect("valid tree")
}

/// `V=5`, `C=4`, two classes, the narrowest legal channel plan.
pub fn tiny_config(seed: u64) -> AngNetConfig {
    AngNetConfig { in_channels: 4, num_classes: 2, scales: 2, channels: [6, 6, 12], dilations: [1, 2, 3, 4], seed }
}

pub const TINY_INPUT: [usize; 4] = [4, 8, 5, 1];

type Build = fn(&mut Graph, &[NodeId], &mut ChaCha8Rng) -> Result<NodeId>;

fn uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, 1.0, rng)
}

/// `sum(y ⊙ r)` for a fixed random `r`, so every output coordinate gets a distinct upstream gradient.
fn project(g: &mut Graph, y: NodeId, rng: &mut ChaCha8Rng) -> Result<NodeId> {
    let r = g.leaf(uniform(g.shape(y), rng));
    let p = g.mul(y, r)?;
    Ok(g.sum(p))
}

struct Case {
    name: &'static str,
    inputs: fn(&mut ChaCha8Rng) -> Vec<Tensor>,
    build: Build,
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "add",
            inputs: |r| vec![uniform(&[2, 3, 2, 1], r), uniform(&[2, 3, 2, 1], r)],
            build: |g, x, r| {
                let y = g.add(x[0], x[1])?;
                project(g, y, r)
            },
        },
        Case {
            name: "mul",
            inputs: |r| vec![uniform(&[3, 4], r), uniform(&[3, 4], r)],
            build: |g, x, r| {
                let y = g.mul(x[0], x[1])?;
                project(g, y, r)
            },
        },
        Case {
            name: "mul_scalar",
            inputs: |r| vec![uniform(&[5], r)],
            build: |g, x, r| {
                let y = g.mul_scalar(x[0], -1.7);
                project(g, y, r)
            },
        },
        Case {
            name: "relu",
            inputs: |r| vec![uniform(&[2, 4, 3, 1], r)],
            build: |g, x, r| {
                let y = g.relu(x[0]);
                project(g, y, r)
            },
        },
        Case {
            name: "reshape",
            inputs: |r| vec![uniform(&[2, 6], r)],
            build: |g, x, r| {
                let y = g.reshape(x[0], &[3, 4])?;
                project(g, y, r)
            },
        },
        Case {
            name: "slice_concat",
            inputs: |r| vec![uniform(&[6, 3, 2, 1], r), uniform(&[2, 3, 2, 1], r)],
            build: |g, x, r| {
                let a = g.slice_channels(x[0], 1, 3)?;
                let y = g.concat_channels(&[x[1], a])?;
                project(g, y, r)
            },
        },
        Case {
            name: "matmul",
            inputs: |r| vec![uniform(&[3, 4], r), uniform(&[4, 2], r)],
            build: |g, x, r| {
                let y = g.matmul(x[0], x[1])?;
                project(g, y, r)
            },
        },
        Case {
            name: "conv_1x1",
            inputs: |r| vec![uniform(&[3, 4, 5, 2], r), uniform(&[4, 3], r), uniform(&[4], r)],
            build: |g, x, r| {
                let y = g.conv_1x1(x[0], x[1], x[2])?;
                project(g, y, r)
            },
        },
        Case {
            name: "graph_aggregate",
            inputs: |r| vec![uniform(&[2, 3, 5, 2], r), uniform(&[5, 5], r)],
            build: |g, x, r| {
                let y = g.graph_aggregate(x[0], x[1])?;
                project(g, y, r)
            },
        },
        Case {
            name: "temporal_conv_3x1",
            inputs: |r| vec![uniform(&[2, 9, 3, 1], r), uniform(&[2, 3], r)],
            build: |g, x, r| {
                let d = r.random_range(1..=4);
                let y = g.temporal_conv_3x1(x[0], x[1], d)?;
                project(g, y, r)
            },
        },
        Case {
            name: "temporal_maxpool_3x1",
            inputs: |r| vec![uniform(&[2, 7, 3, 1], r)],
            build: |g, x, r| {
                let y = g.temporal_maxpool_3x1(x[0])?;
                project(g, y, r)
            },
        },
        Case {
            name: "global_avg_pool",
            inputs: |r| vec![uniform(&[3, 4, 5, 2], r)],
            build: |g, x, r| {
                let y = g.global_avg_pool(x[0])?;
                project(g, y, r)
            },
        },
        Case {
            name: "softmax_cross_entropy",
            inputs: |r| vec![Tensor::uniform(&[4], 3.0, r)],
            build: |g, x, r| {
                let label = r.random_range(0..4);
                g.softmax_cross_entropy(x[0], label)
            },
        },
    ]
}

pub fn primitive_names() -> Vec<&'static str> {
    cases().iter().map(|c| c.name).collect()
}

/// Checks every primitive on `instances` random instances; one merged report per primitive.
pub fn primitive_checks(seed: u64, instances: usize) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let mut out = Vec::new();
    for (k, case) in cases().into_iter().enumerate() {
        let mut merged = GradCheckReport::default();
        for i in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((k as u64) << 32) | i as u64);
            let inputs = (case.inputs)(&mut rng);
            let build_seed: u64 = rng.random();
            let report = check_gradients(
                &inputs,
                |g, ids| (case.build)(g, ids, &mut ChaCha8Rng::seed_from_u64(build_seed)),
                STEP,
            )?;
            merged.merge(&report, 0);
        }
        out.push((case.name, merged));
    }
    Ok(out)
}

/// Gradient of the cross-entropy loss with respect to every parameter of the
/// tiny network, against central differences. Masks and biases are
/// randomised so that every parameter path is active.
pub fn end_to_end_check(seed: u64) -> Result<GradCheckReport> {
    let mut model = AngNet::new(tiny_config(seed), tiny_topology())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
    for p in model.params_mut().iter_mut() {
        if p.value.data().iter().all(|&x| x == 0.0) {
            p.value = Tensor::uniform(p.value.shape(), 0.1, &mut rng);
        }
    }
    let x = uniform(&TINY_INPUT, &mut rng);
    let label = rng.random_range(0..2);
    let inputs = model.params().values();
    check_gradients(
        &inputs,
        |g, ids| {
            let xi = g.leaf(x.clone());
            let z = model.forward_graph(g, ids, xi)?;
            g.softmax_cross_entropy(z, label)
        },
        STEP,
    )
}
