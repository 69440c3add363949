//! Trains joint-only and joint+angular models on the confusable synthetic
//! set and prints test accuracies.
//!
//! `cargo run --release --example disambiguation -- [seed] [epochs] [n_per_class]`

use std::time::Instant;

use angkit::angnet::{AngNet, AngNetConfig};
use angkit::encoders::{parse_feature_list, Stream};
use angkit::synth::{generate_synthetic, SynthSpec};
use angkit::training::{evaluate, samples_from_clips, train, TrainConfig, TrainingMeta};
use angkit::SkeletonTopology;

fn main() -> angkit::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let seed = args.first().copied().unwrap_or(0);
    let epochs = args.get(1).copied().unwrap_or(30) as usize;
    let n = args.get(2).copied().unwrap_or(48) as usize;
    let topo = SkeletonTopology::kinect25();
    let spec = SynthSpec { frames: 16, ..SynthSpec::default() };
    let train_clips = generate_synthetic(&spec, n, seed)?;
    let test_clips = generate_synthetic(&spec, 64, seed + 1000)?;
    for fs in ["joint", "joint,angular"] {
        let features = parse_feature_list(fs)?;
        let start = Instant::now();
        let tr = samples_from_clips(&train_clips, &topo, &features, Stream::Static)?;
        let te = samples_from_clips(&test_clips, &topo, &features, Stream::Static)?;
        let cfg =
            AngNetConfig { scales: 2, channels: [12, 12, 24], seed, ..AngNetConfig::desk(tr[0].features.shape().c, 2) };
        let mut model = AngNet::new(cfg, topo.clone())?;
        model.fit_input_norm(tr.iter().map(|s| &s.features))?;
        let tc = TrainConfig {
            epochs,
            decay_epochs: vec![epochs * 3 / 4],
            batch_size: 8,
            base_lr: 0.01,
            seed,
            ..TrainConfig::default()
        };
        let mut meta = TrainingMeta::default();
        train(&mut model, &tr, &tc, &mut meta, |r| eprintln!("  {r}"))?;
        let ev = evaluate(&model, &te)?;
        println!("{fs}: test accuracy {:.3} ({:.1}s)", ev.accuracy, start.elapsed().as_secs_f64());
    }
    Ok(())
}
