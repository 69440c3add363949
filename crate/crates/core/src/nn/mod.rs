//! A small dense reverse-mode autodiff engine.
//!
//! Values live on an append-only [`Graph`] (a tape): every operation pushes a
//! node whose parents have smaller ids, so reverse id order is a topological
//! order for [`Graph::backward`]. One graph is built per sample and is confined
//! to one thread; trainable values live in a [`ParamRegistry`] and enter a
//! graph as leaves.

pub mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use params::{Param, ParamRegistry};
pub use tape::{softmax, Graph, NodeId};
pub use tensor::Tensor;
