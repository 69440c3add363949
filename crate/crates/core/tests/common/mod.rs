#![allow(dead_code)]

use angkit::angnet::AngNet;
use angkit::training::Sample;
use angkit::{Clip, FeatureTensor, Shape4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_features(shape: Shape4, rng: &mut impl Rng) -> FeatureTensor {
    let n = shape.c * shape.t * shape.v * shape.m;
    let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let names = (0..shape.c).map(|c| format!("ch{c}")).collect();
    FeatureTensor::new(shape, data, names).unwrap()
}

/// A clip with every joint drawn uniformly from a 2 m cube.
pub fn random_clip(frames: usize, joints: usize, persons: usize, rng: &mut impl Rng) -> Clip {
    let coords = (0..frames * joints * persons * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    Clip::new(frames, joints, persons, coords, None, frames).unwrap()
}

/// Two-class data the tiny network can separate: the class shifts channel 0.
pub fn tiny_samples(n: usize, shape: Shape4, seed: u64) -> Vec<Sample> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let label = i % 2;
            let mut features = random_features(shape, &mut r);
            for x in features.channel_mut(0) {
                *x += if label == 0 { -1.0 } else { 1.0 };
            }
            Sample { features, label }
        })
        .collect()
}

pub fn param_bits(model: &AngNet) -> Vec<u64> {
    model.params().iter().flat_map(|p| p.value.data().iter().map(|x| x.to_bits())).collect()
}

pub fn momentum_bits(model: &AngNet) -> Vec<u64> {
    model.params().iter().flat_map(|p| p.momentum.iter().map(|x| x.to_bits())).collect()
}
