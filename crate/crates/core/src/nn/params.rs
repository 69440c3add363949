use std::collections::HashMap;

use super::tape::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A trainable tensor with its gradient accumulator and momentum buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Vec<f64>,
    pub momentum: Vec<f64>,
}

/// Named parameters in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamRegistry {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        let n = value.len();
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param { name, value, grad: vec![0.0; n], momentum: vec![0.0; n] });
        Ok(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.index.get(name).map(|&i| &mut self.params[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn values(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    /// Pushes every parameter value onto `g` as a leaf, in registry order.
    pub fn bind(&self, g: &mut Graph) -> Vec<NodeId> {
        self.params.iter().map(|p| g.leaf(p.value.clone())).collect()
    }

    /// Gradients of bound leaves after `g.backward`; unreached leaves give zeros.
    pub fn collect_grads(&self, g: &Graph, bound: &[NodeId]) -> Vec<Vec<f64>> {
        self.params
            .iter()
            .zip(bound)
            .map(|(p, &id)| g.grad(id).map_or_else(|| vec![0.0; p.value.len()], <[f64]>::to_vec))
            .collect()
    }

    /// `grad += scale · grads`, parameter by parameter.
    pub fn accumulate(&mut self, grads: &[Vec<f64>], scale: f64) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::Shape(format!("{} gradient blocks for {} parameters", grads.len(), self.params.len())));
        }
        for (p, g) in self.params.iter_mut().zip(grads) {
            if g.len() != p.grad.len() {
                return Err(Error::Shape(format!(
                    "gradient for `{}` has {} entries, expected {}",
                    p.name,
                    g.len(),
                    p.grad.len()
                )));
            }
            for (a, b) in p.grad.iter_mut().zip(g) {
                *a += scale * b;
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }
}
