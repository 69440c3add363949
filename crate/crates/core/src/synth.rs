//! Procedural kinect25 clips built by forward kinematics.
//!
//! Every clip is drawn from a latent pose (body proportions are fixed, the
//! upper-arm orientation, forearm twist, leg bend, torso lean, motion phase,
//! yaw and subject scale are random). The pelvis sits at the origin, as after
//! translation normalisation. The class only decides the elbow
//! flexion trajectory, so two clips rendered from the same latent pose differ
//! in nothing but their forearms and hands.

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::Clip;

pub const KINECT25_JOINTS: usize = 25;

/// Elbow flexion `mean + amplitude · sin(2π · cycles · t/T + phase)`, in degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassDef {
    pub name: String,
    pub elbow_mean_deg: f64,
    pub elbow_amplitude_deg: f64,
    pub elbow_cycles: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub classes: Vec<ClassDef>,
    /// Uniform subject scale range, inclusive.
    pub scale_range: (f64, f64),
    /// Yaw about the vertical axis is drawn from `±yaw_range_deg`.
    pub yaw_range_deg: f64,
    /// Per-clip random spread of the upper-arm orientation.
    pub arm_jitter_deg: f64,
    pub noise_sigma: f64,
    pub frames: usize,
    pub persons: usize,
}

impl Default for SynthSpec {
    /// Two classes that differ only in elbow flexion, with full-turn yaw.
    fn default() -> Self {
        SynthSpec {
            classes: vec![
                ClassDef {
                    name: "flex_low".into(),
                    elbow_mean_deg: 45.0,
                    elbow_amplitude_deg: 20.0,
                    elbow_cycles: 1.0,
                },
                ClassDef {
                    name: "flex_high".into(),
                    elbow_mean_deg: 85.0,
                    elbow_amplitude_deg: 20.0,
                    elbow_cycles: 1.0,
                },
            ],
            scale_range: (0.8, 1.2),
            yaw_range_deg: 180.0,
            arm_jitter_deg: 35.0,
            noise_sigma: 0.01,
            frames: 32,
            persons: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.classes.len())));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!("scale range ({lo}, {hi}) must be positive and ordered")));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma {} must be finite and non-negative", self.noise_sigma)));
        }
        if !(self.yaw_range_deg >= 0.0 && self.arm_jitter_deg >= 0.0) {
            return Err(Error::Config("yaw range and arm jitter must be non-negative".into()));
        }
        if self.frames == 0 || self.persons == 0 {
            return Err(Error::Config("frames and persons must be at least 1".into()));
        }
        Ok(())
    }
}

/// Nuisance variables of one person in one clip.
#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub scale: f64,
    pub yaw: f64,
    pub lean: f64,
    pub phase: f64,
    /// Per arm (left, right): elevation, forward angle, forearm twist, swing amplitude.
    pub arms: [[f64; 4]; 2],
    pub knee_bend: [f64; 2],
    pub offset: [f64; 3],
    pub noise_seed: u64,
}

impl Latent {
    /// Upright, facing +z, arms hanging, no noise.
    pub fn neutral() -> Self {
        Latent {
            scale: 1.0,
            yaw: 0.0,
            lean: 0.0,
            phase: 0.0,
            arms: [[0.3, 0.4, 0.0, 0.0]; 2],
            knee_bend: [0.1; 2],
            offset: [0.0; 3],
            noise_seed: 0,
        }
    }

    pub fn sample(spec: &SynthSpec, rng: &mut impl Rng) -> Self {
        let jitter = spec.arm_jitter_deg.to_radians();
        let mut spread = |c: f64| c + rng.random_range(-1.0..=1.0) * jitter;
        let arms = [[spread(0.4), spread(0.5), spread(0.0), 0.0], [spread(0.4), spread(0.5), spread(0.0), 0.0]];
        let (lo, hi) = spec.scale_range;
        let yaw = spec.yaw_range_deg.to_radians();
        let mut latent = Latent {
            scale: if hi > lo { rng.random_range(lo..=hi) } else { lo },
            yaw: if yaw > 0.0 { rng.random_range(-yaw..=yaw) } else { 0.0 },
            lean: rng.random_range(-0.15..=0.15),
            phase: rng.random_range(0.0..TAU),
            arms,
            knee_bend: [rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)],
            offset: [0.0; 3],
            noise_seed: rng.random(),
        };
        for arm in &mut latent.arms {
            arm[3] = rng.random_range(0.0..0.3);
        }
        latent
    }
}

fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

/// Joint positions for one frame, before yaw, scale and noise.
fn pose(latent: &Latent, flexion: [f64; 2], t: f64) -> [Vector3<f64>; KINECT25_JOINTS] {
    let mut p = [Vector3::zeros(); KINECT25_JOINTS];
    let lean = Rotation3::from_axis_angle(&Vector3::x_axis(), latent.lean);
    let pelvis = Vector3::zeros();
    let up = |h: f64, x: f64| pelvis + lean * v3(x, h, 0.0);
    p[0] = pelvis;
    p[1] = up(0.25, 0.0);
    p[20] = up(0.45, 0.0);
    p[2] = up(0.52, 0.0);
    p[3] = up(0.65, 0.0);

    for (side, (sign, [shoulder, elbow, wrist, hand, tip, thumb])) in
        [(1.0, [4, 5, 6, 7, 21, 22]), (-1.0, [8, 9, 10, 11, 23, 24])].into_iter().enumerate()
    {
        let [elevation, forward, twist, swing] = latent.arms[side];
        p[shoulder] = up(0.42, 0.18 * sign);
        let swing = swing * (t * TAU + latent.phase).sin();
        let lift = Rotation3::from_axis_angle(&Vector3::z_axis(), sign * elevation);
        let reach = Rotation3::from_axis_angle(&Vector3::x_axis(), -(forward + swing));
        let upper = lean * reach * lift * v3(0.0, -1.0, 0.0);
        let upper_axis = Unit::new_normalize(upper);
        // Bend axis: perpendicular to the upper arm, rotated about it by the twist.
        let side_ref = lean * reach * v3(sign, 0.0, 0.0);
        let base_axis = Unit::new_normalize(upper.cross(&side_ref));
        let bend_axis = Unit::new_normalize(Rotation3::from_axis_angle(&upper_axis, twist) * base_axis.into_inner());
        let fore = Rotation3::from_axis_angle(&bend_axis, flexion[side]) * upper;
        p[elbow] = p[shoulder] + 0.28 * upper;
        p[wrist] = p[elbow] + 0.25 * fore;
        p[hand] = p[wrist] + 0.07 * fore;
        p[tip] = p[hand] + 0.06 * fore;
        p[thumb] = p[hand] + 0.04 * fore + 0.04 * bend_axis.into_inner();
    }

    for (side, (sign, [hip, knee, ankle, foot])) in
        [(1.0, [12, 13, 14, 15]), (-1.0, [16, 17, 18, 19])].into_iter().enumerate()
    {
        let bend = latent.knee_bend[side];
        p[hip] = pelvis + v3(0.09 * sign, -0.05, 0.0);
        p[knee] = p[hip] + v3(0.0, -0.43 * bend.cos(), 0.43 * bend.sin());
        p[ankle] = p[knee] + v3(0.0, -0.42, 0.0);
        p[foot] = p[ankle] + v3(0.0, -0.05, 0.10);
    }
    p
}

/// Renders one clip of class `class` for each latent (one latent per person).
pub fn render_clip(spec: &SynthSpec, class: usize, latents: &[Latent]) -> Result<Clip> {
    let def = spec
        .classes
        .get(class)
        .ok_or_else(|| Error::Config(format!("class {class} out of range for {} classes", spec.classes.len())))?;
    if latents.len() != spec.persons {
        return Err(Error::Config(format!("{} latents for {} persons", latents.len(), spec.persons)));
    }
    let (frames, m_count) = (spec.frames, spec.persons);
    let mut coords = vec![0.0; frames * KINECT25_JOINTS * m_count * 3];
    for (m, latent) in latents.iter().enumerate() {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(latent.noise_seed);
        let yaw = Rotation3::from_axis_angle(&Vector3::y_axis(), latent.yaw);
        let offset = Vector3::from(latent.offset);
        for t in 0..frames {
            let s = t as f64 / frames as f64;
            let angle = |shift: f64| {
                let deg = def.elbow_mean_deg
                    + def.elbow_amplitude_deg * (TAU * def.elbow_cycles * s + latent.phase + shift).sin();
                deg.to_radians().clamp(0.0, PI)
            };
            let joints = pose(latent, [angle(0.0), angle(0.5)], s);
            for (v, j) in joints.iter().enumerate() {
                let q = latent.scale * (yaw * j) + offset;
                let base = ((t * KINECT25_JOINTS + v) * m_count + m) * 3;
                for k in 0..3 {
                    let e = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    coords[base + k] = q[k] + e;
                }
            }
        }
    }
    Clip::new(frames, KINECT25_JOINTS, m_count, coords, Some(class), frames)
}

/// Per-sample generator, independent of how many other samples are drawn.
fn sample_rng(seed: u64, class: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 32) | index as u64);
    rng
}

/// `n_per_class` labelled clips per class, ordered by class then index.
pub fn generate_synthetic(spec: &SynthSpec, n_per_class: usize, seed: u64) -> Result<Vec<Clip>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(n_per_class * spec.classes.len());
    for class in 0..spec.classes.len() {
        for i in 0..n_per_class {
            let mut rng = sample_rng(seed, class, i);
            let latents: Vec<Latent> = (0..spec.persons)
                .map(|m| {
                    let mut l = Latent::sample(spec, &mut rng);
                    l.offset = [1.2 * m as f64, 0.0, 0.0];
                    l
                })
                .collect();
            out.push(render_clip(spec, class, &latents)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{angular_features, bone_features};
    use crate::topology::SkeletonTopology;

    fn quiet() -> SynthSpec {
        SynthSpec { noise_sigma: 0.0, scale_range: (1.0, 1.0), frames: 12, ..SynthSpec::default() }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(&quiet(), 1, 9).unwrap();
        let b = generate_synthetic(&quiet(), 1, 9).unwrap();
        assert_eq!(a, b);
        let noisy = SynthSpec::default();
        assert_eq!(generate_synthetic(&noisy, 3, 1).unwrap(), generate_synthetic(&noisy, 3, 1).unwrap());
        assert_ne!(generate_synthetic(&noisy, 3, 1).unwrap(), generate_synthetic(&noisy, 3, 2).unwrap());
    }

    #[test]
    fn bone_lengths_follow_the_model() {
        let clip = render_clip(&quiet(), 0, &[Latent::neutral()]).unwrap();
        let d = |a: usize, b: usize| {
            let (p, q) = (clip.point(3, a, 0), clip.point(3, b, 0));
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
        };
        assert!((d(4, 5) - 0.28).abs() < 1e-12);
        assert!((d(5, 6) - 0.25).abs() < 1e-12);
        assert!((d(9, 10) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn classes_differ_only_at_the_elbows() {
        let spec = quiet();
        let topo = SkeletonTopology::kinect25();
        let latent = Latent::sample(&spec, &mut ChaCha8Rng::seed_from_u64(3));
        let a = render_clip(&spec, 0, std::slice::from_ref(&latent)).unwrap();
        let b = render_clip(&spec, 1, std::slice::from_ref(&latent)).unwrap();
        for t in 0..spec.frames {
            assert_eq!(a.point(t, 0, 0), b.point(t, 0, 0));
            assert_eq!(a.point(t, 5, 0), b.point(t, 5, 0));
        }
        let (fa, fb) = (angular_features(&a, &topo).unwrap(), angular_features(&b, &topo).unwrap());
        let elbow = |f: &crate::FeatureTensor, t: usize| f.get(0, t, 5, 0).unwrap();
        assert!((0..spec.frames).any(|t| (elbow(&fa, t) - elbow(&fb, t)).abs() > 0.05));
        // Interior elbow angle is pi minus the flexion.
        let flex = (45.0f64 + 20.0 * latent.phase.sin()).to_radians();
        assert!((elbow(&fa, 0) - (1.0 + flex.cos())).abs() < 1e-9);
    }

    #[test]
    fn scale_leaves_angles_and_doubles_bones() {
        let spec = quiet();
        let topo = SkeletonTopology::kinect25();
        let mut latent = Latent::sample(&spec, &mut ChaCha8Rng::seed_from_u64(4));
        latent.scale = 1.0;
        let one = render_clip(&spec, 1, std::slice::from_ref(&latent)).unwrap();
        latent.scale = 2.0;
        let two = render_clip(&spec, 1, std::slice::from_ref(&latent)).unwrap();
        let (a1, a2) = (angular_features(&one, &topo).unwrap(), angular_features(&two, &topo).unwrap());
        assert!(a1.data().iter().zip(a2.data()).all(|(x, y)| (x - y).abs() < 1e-9));
        let (b1, b2) = (bone_features(&one, &topo).unwrap(), bone_features(&two, &topo).unwrap());
        assert!(b1.data().iter().zip(b2.data()).all(|(x, y)| (2.0 * x - y).abs() < 1e-12));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = SynthSpec::default();
        s.classes.truncate(1);
        assert!(s.validate().is_err());
        let s = SynthSpec { scale_range: (0.0, 1.0), ..SynthSpec::default() };
        assert!(s.validate().is_err());
    }
}
