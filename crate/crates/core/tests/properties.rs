//! Property tests for encoders, graph operators and the binary formats.

mod common;

use angkit::angnet::{checkpoint_bytes, checkpoint_from_bytes, AngNet, AngNetConfig};
use angkit::encoders::{angular_features, bone_features, static_angle, temporal_difference};
use angkit::graph::{build_adjacency, k_hop_reachability};
use angkit::io::{parse_skeleton_file, read_tensor, write_skeleton_text, write_tensor, RawSequence};
use angkit::kv::KvDoc;
use angkit::training::TrainingMeta;
use angkit::{Clip, FeatureTensor, Shape4, SkeletonTopology};
use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;

fn clip_strategy(joints: usize) -> impl Strategy<Value = Clip> {
    (1usize..5, 1usize..3).prop_flat_map(move |(t, m)| {
        prop::collection::vec(-1.5f64..1.5, t * joints * m * 3)
            .prop_map(move |coords| Clip::new(t, joints, m, coords, None, t).unwrap())
    })
}

fn tensor_strategy() -> impl Strategy<Value = FeatureTensor> {
    (1usize..4, 1usize..5, 1usize..6, 1usize..3).prop_flat_map(|(c, t, v, m)| {
        let names = prop::collection::vec("[a-z_]{0,8}", c);
        (prop::collection::vec(-1e6f64..1e6, c * t * v * m), names)
            .prop_map(move |(data, names)| FeatureTensor::new(Shape4::new(c, t, v, m), data, names).unwrap())
    })
}

/// Parent of joint `i > 0` is `parents[i - 1] % i`.
fn tree_strategy() -> impl Strategy<Value = SkeletonTopology> {
    (1usize..=25).prop_flat_map(|v| {
        prop::collection::vec(any::<usize>(), v - 1).prop_map(move |parents| {
            let edges = parents.iter().enumerate().map(|(i, p)| (p % (i + 1), i + 1)).collect();
            SkeletonTopology::bare_tree(v, edges).unwrap()
        })
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angular_features_ignore_uniform_scale(clip in clip_strategy(25), s in 0.5f64..3.0) {
        let topo = SkeletonTopology::kinect25();
        let a = angular_features(&clip, &topo).unwrap();
        let b = angular_features(&clip.map_points(|p| p.map(|x| s * x)).unwrap(), &topo).unwrap();
        prop_assert!(max_abs_diff(a.data(), b.data()) < 1e-9);
    }

    #[test]
    fn angular_features_ignore_rigid_motion(
        clip in clip_strategy(25),
        axis in (-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0),
        angle in -std::f64::consts::PI..std::f64::consts::PI,
        shift in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
    ) {
        let topo = SkeletonTopology::kinect25();
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(axis.0, axis.1, axis.2)), angle);
        let moved = clip
            .map_points(|p| {
                let q = rot * Vector3::from(p) + Vector3::new(shift.0, shift.1, shift.2);
                [q.x, q.y, q.z]
            })
            .unwrap();
        let a = angular_features(&clip, &topo).unwrap();
        let b = angular_features(&moved, &topo).unwrap();
        prop_assert!(max_abs_diff(a.data(), b.data()) < 1e-6);
    }

    #[test]
    fn angular_values_are_bounded_and_zero_joints_are_zero(clip in clip_strategy(25)) {
        let topo = SkeletonTopology::kinect25();
        let f = angular_features(&clip, &topo).unwrap();
        prop_assert!(f.data().iter().all(|x| (0.0..=2.0).contains(x)));
        let s = f.shape();
        for (c, def) in topo.angle_table().iter().enumerate() {
            for &j in &def.zero_joints {
                for t in 0..s.t {
                    for m in 0..s.m {
                        prop_assert_eq!(f.get(c, t, j, m).unwrap(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn static_angle_is_symmetric_in_its_endpoints(
        u in prop::array::uniform3(-2.0f64..2.0),
        a in prop::array::uniform3(-2.0f64..2.0),
        b in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let d = static_angle(u, a, b);
        prop_assert!((0.0..=2.0).contains(&d));
        prop_assert_eq!(d, static_angle(u, b, a));
    }

    #[test]
    fn bones_scale_linearly(clip in clip_strategy(25), s in 0.5f64..3.0) {
        let topo = SkeletonTopology::kinect25();
        let a = bone_features(&clip, &topo).unwrap();
        let b = bone_features(&clip.map_points(|p| p.map(|x| s * x)).unwrap(), &topo).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((s * x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn velocity_of_a_static_pose_is_zero(clip in clip_strategy(25)) {
        let topo = SkeletonTopology::kinect25();
        let first: Vec<f64> = (0..25 * clip.persons()).flat_map(|i| clip.point(0, i / clip.persons(), i % clip.persons())).collect();
        let frozen = Clip::new(clip.frames(), 25, clip.persons(), first.repeat(clip.frames()), None, clip.frames()).unwrap();
        let v = temporal_difference(&angular_features(&frozen, &topo).unwrap());
        prop_assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn k_hop_matches_breadth_first_balls(topo in tree_strategy(), k in 1usize..6) {
        let reach = k_hop_reachability(&build_adjacency(&topo), k).unwrap();
        for i in 0..topo.num_joints() {
            let dist = topo.distances_from(i);
            for (j, d) in dist.iter().enumerate() {
                prop_assert_eq!(reach.get(i, j), d.unwrap() <= k);
            }
        }
    }

    #[test]
    fn tensor_round_trip_is_byte_identical(t in tensor_strategy()) {
        let mut first = Vec::new();
        let n = write_tensor(&t, &mut first).unwrap();
        prop_assert_eq!(n, first.len());
        let back = read_tensor(&first[..]).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert_eq!(back.channel_names(), t.channel_names());
        for (a, b) in back.data().iter().zip(t.data()) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
        let mut second = Vec::new();
        write_tensor(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn skeleton_text_round_trips(clip in clip_strategy(25)) {
        let topo = SkeletonTopology::kinect25();
        let seq = RawSequence::from_clip(&clip);
        let text = write_skeleton_text(&seq);
        let parsed = parse_skeleton_file(text.as_bytes(), &topo).unwrap();
        prop_assert_eq!(write_skeleton_text(&parsed), text);
    }

    #[test]
    fn random_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let topo = SkeletonTopology::kinect25();
        let _ = read_tensor(&bytes[..]);
        let _ = parse_skeleton_file(&bytes, &topo);
        let _ = checkpoint_from_bytes(&bytes[..]);
        if let Ok(s) = std::str::from_utf8(&bytes) {
            let _ = KvDoc::parse(s);
            let _ = SkeletonTopology::from_schema_str(s);
        }
    }

    #[test]
    fn mutated_files_never_panic(pos in any::<prop::sample::Index>(), byte in any::<u8>(), t in tensor_strategy()) {
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        let i = pos.index(buf.len());
        buf[i] = byte;
        let _ = read_tensor(&buf[..]);
        let _ = read_tensor(&buf[..i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn checkpoint_round_trip_is_byte_identical(seed in any::<u64>(), epoch in 0usize..50) {
        let cfg = AngNetConfig { in_channels: 3, num_classes: 3, scales: 2, channels: [6, 6, 12], dilations: [1, 2, 3, 4], seed };
        let model = AngNet::new(cfg, SkeletonTopology::kinect25()).unwrap();
        let meta = TrainingMeta { epoch, seed, ..TrainingMeta::default() };
        let bytes = checkpoint_bytes(&model, &meta).unwrap();
        let (back, meta2) = checkpoint_from_bytes(&bytes[..]).unwrap();
        prop_assert_eq!(&meta2, &meta);
        prop_assert_eq!(checkpoint_bytes(&back, &meta2).unwrap(), bytes);
    }
}
