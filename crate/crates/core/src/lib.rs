//! Angular (third-order) skeleton features alongside joint and bone
//! features, plus a compact multiscale spatio-temporal graph network that
//! consumes them.
//!
//! The crate is organised bottom-up:
//!
//! - [`types`] and [`topology`]: skeleton schemas, clips and dense feature tensors.
//! - [`io`] and [`archive`]: capture-file parsing, clip normalisation, the `ANGK1`
//!   tensor format and directories of clips.
//! - [`encoders`]: joint, bone and angular features in static and velocity streams.
//! - [`graph`]: adjacency, k-hop reachability and normalised graph operators.
//! - [`nn`]: a small reverse-mode autodiff engine with the layers the backbone needs.
//! - [`angnet`]: the backbone itself and its `ANGM1` checkpoints.
//! - [`synth`] and [`training`]: synthetic data, SGD, schedules, evaluation and ensembling.
//! - [`verify`]: finite-difference checks of every layer and of the whole network.
//! - [`cli`]: the `angkit` command-line front end.

pub mod angnet;
pub mod archive;
pub mod cli;
pub mod encoders;
pub mod error;
pub mod graph;
pub mod io;
pub mod kv;
pub mod nn;
pub mod synth;
pub mod topology;
pub mod training;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use topology::{AngleDef, AngleKind, Endpoints, SkeletonTopology, Vertex};
pub use types::{flatten_index, Clip, FeatureTensor, Shape4};
