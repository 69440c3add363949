//! Joint, bone and angular features in the static and velocity streams.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::topology::SkeletonTopology;
use crate::types::{Clip, FeatureTensor, Shape4};

/// Vector norms below this are treated as degenerate.
pub const NORM_EPS: f64 = 1e-8;

pub const JOINT_CHANNELS: [&str; 3] = ["jnt_x", "jnt_y", "jnt_z"];
pub const BONE_CHANNELS: [&str; 3] = ["bone_x", "bone_y", "bone_z"];
pub const VELOCITY_PREFIX: &str = "vel_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Joint,
    Bone,
    Angular,
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "joint" => Ok(FeatureKind::Joint),
            "bone" => Ok(FeatureKind::Bone),
            "angular" | "angle" => Ok(FeatureKind::Angular),
            other => Err(Error::Config(format!("unknown feature `{other}` (expected joint, bone or angular)"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Joint => "joint",
            FeatureKind::Bone => "bone",
            FeatureKind::Angular => "angular",
        })
    }
}

/// Parses a comma-separated feature list such as `joint,angular`.
pub fn parse_feature_list(s: &str) -> Result<Vec<FeatureKind>> {
    let kinds = s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(Error::Config("empty feature selection".into()));
    }
    Ok(kinds)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Stream {
    #[default]
    Static,
    Velocity,
}

impl FromStr for Stream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "static" => Ok(Stream::Static),
            "velocity" => Ok(Stream::Velocity),
            other => Err(Error::Config(format!("unknown stream `{other}` (expected static or velocity)"))),
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stream::Static => "static",
            Stream::Velocity => "velocity",
        })
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Writes per-joint 3-vectors into three channel blocks.
fn xyz_tensor(clip: &Clip, channel_names: &[&str], f: impl Fn(usize, usize, usize) -> [f64; 3]) -> FeatureTensor {
    let shape = clip.feature_shape(3);
    let plane = shape.plane();
    let mut data = vec![0.0; shape.len()];
    let mut i = 0;
    for t in 0..clip.frames() {
        for v in 0..clip.joints() {
            for m in 0..clip.persons() {
                let p = f(t, v, m);
                for k in 0..3 {
                    data[k * plane + i] = p[k];
                }
                i += 1;
            }
        }
    }
    FeatureTensor::new(shape, data, names(channel_names)).expect("shape built from clip")
}

pub fn joint_features(clip: &Clip) -> FeatureTensor {
    xyz_tensor(clip, &JOINT_CHANNELS, |t, v, m| clip.point(t, v, m))
}

/// Vector from each joint to its parent (the neighbour closer to the body
/// center). The root joint gets a zero vector.
pub fn bone_features(clip: &Clip, topology: &SkeletonTopology) -> Result<FeatureTensor> {
    check_joints(clip, topology)?;
    let parents = topology.bone_parent();
    Ok(xyz_tensor(clip, &BONE_CHANNELS, |t, v, m| match parents[v] {
        None => [0.0; 3],
        Some(p) => {
            let a = clip.point(t, v, m);
            let b = clip.point(t, p, m);
            [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
        }
    }))
}

/// `1 − cos θ` for the angle at `u` between the rays to `w1` and `w2`.
///
/// Returns 0 when either ray is shorter than [`NORM_EPS`] (which includes
/// `u` coinciding with an endpoint). Always in `[0, 2]`.
pub fn static_angle(u: [f64; 3], w1: [f64; 3], w2: [f64; 3]) -> f64 {
    let a = [w1[0] - u[0], w1[1] - u[1], w1[2] - u[2]];
    let b = [w2[0] - u[0], w2[1] - u[1], w2[2] - u[2]];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if na < NORM_EPS || nb < NORM_EPS {
        return 0.0;
    }
    let cos = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
    1.0 - cos.clamp(-1.0, 1.0)
}

/// One channel per entry of the topology's angle table.
pub fn angular_features(clip: &Clip, topology: &SkeletonTopology) -> Result<FeatureTensor> {
    check_joints(clip, topology)?;
    let table = topology.angle_table();
    let shape = clip.feature_shape(table.len());
    let center = topology.center_pair();
    let mut out = FeatureTensor::zeros(shape, table.iter().map(|d| d.name.clone()).collect())?;
    for (c, def) in table.iter().enumerate() {
        let block = out.channel_mut(c);
        let mut i = 0;
        for t in 0..clip.frames() {
            for v in 0..clip.joints() {
                let resolved = def.resolve(v, center);
                for m in 0..clip.persons() {
                    if let Some((u, w1, w2)) = resolved {
                        block[i] = static_angle(clip.point(t, u, m), clip.point(t, w1, m), clip.point(t, w2, m));
                    }
                    i += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Frame-to-frame differences; frame 0 is zero. Channel names gain `vel_`.
pub fn temporal_difference(x: &FeatureTensor) -> FeatureTensor {
    let s = x.shape();
    let step = s.v * s.m;
    let mut data = vec![0.0; s.len()];
    for c in 0..s.c {
        let src = x.channel(c);
        let dst = &mut data[c * s.plane()..(c + 1) * s.plane()];
        for i in step..src.len() {
            dst[i] = src[i] - src[i - step];
        }
    }
    let names = x.channel_names().iter().map(|n| format!("{VELOCITY_PREFIX}{n}")).collect();
    FeatureTensor::new(s, data, names).expect("same shape as input")
}

/// Stacks channels of tensors sharing `(T, V, M)`, in argument order.
pub fn fuse_concat(parts: &[FeatureTensor]) -> Result<FeatureTensor> {
    let first = parts.first().ok_or_else(|| Error::Shape("nothing to concatenate".into()))?.shape();
    let mut data = Vec::new();
    let mut channel_names = Vec::new();
    let mut c = 0;
    for p in parts {
        let s = p.shape();
        if (s.t, s.v, s.m) != (first.t, first.v, first.m) {
            return Err(Error::Shape(format!(
                "cannot concatenate (T,V,M)=({},{},{}) with ({},{},{})",
                first.t, first.v, first.m, s.t, s.v, s.m
            )));
        }
        data.extend_from_slice(p.data());
        channel_names.extend(p.channel_names().iter().cloned());
        c += s.c;
    }
    FeatureTensor::new(first.with_channels(c), data, channel_names)
}

/// Channel offset of each part inside `fuse_concat(parts)`.
pub fn channel_offsets(parts: &[FeatureTensor]) -> Vec<usize> {
    parts
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.shape().c;
            Some(o)
        })
        .collect()
}

/// Number of channels `encode` produces for a selection.
pub fn channel_count(features: &[FeatureKind], topology: &SkeletonTopology) -> usize {
    features
        .iter()
        .map(|f| match f {
            FeatureKind::Joint | FeatureKind::Bone => 3,
            FeatureKind::Angular => topology.angle_table().len(),
        })
        .sum()
}

/// Encodes the selected features, fuses them by concatenation and applies the stream.
pub fn encode(
    clip: &Clip,
    topology: &SkeletonTopology,
    features: &[FeatureKind],
    stream: Stream,
) -> Result<FeatureTensor> {
    let parts = features
        .iter()
        .map(|f| match f {
            FeatureKind::Joint => Ok(joint_features(clip)),
            FeatureKind::Bone => bone_features(clip, topology),
            FeatureKind::Angular => angular_features(clip, topology),
        })
        .collect::<Result<Vec<_>>>()?;
    let fused = fuse_concat(&parts)?;
    Ok(match stream {
        Stream::Static => fused,
        Stream::Velocity => temporal_difference(&fused),
    })
}

/// Thread cap for batch encoding, from `ANGKIT_THREADS` (0 or unset = rayon default).
pub fn encoder_threads() -> usize {
    std::env::var("ANGKIT_THREADS").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

/// Encodes many clips in parallel; output order matches input order.
pub fn encode_many(
    clips: &[Clip],
    topology: &SkeletonTopology,
    features: &[FeatureKind],
    stream: Stream,
) -> Result<Vec<FeatureTensor>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(encoder_threads())
        .build()
        .map_err(|e| Error::Config(format!("encoder thread pool: {e}")))?;
    pool.install(|| clips.par_iter().map(|c| encode(c, topology, features, stream)).collect())
}

fn check_joints(clip: &Clip, topology: &SkeletonTopology) -> Result<()> {
    if clip.joints() != topology.num_joints() {
        return Err(Error::Shape(format!(
            "clip has {} joints, schema `{}` has {}",
            clip.joints(),
            topology.name,
            topology.num_joints()
        )));
    }
    Ok(())
}

/// Shape of `encode`'s output for `clip`.
pub fn encoded_shape(clip: &Clip, topology: &SkeletonTopology, features: &[FeatureKind]) -> Shape4 {
    clip.feature_shape(channel_count(features, topology))
}
