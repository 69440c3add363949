use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major `f64` array of rank 0 to 4.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        if shape.len() > 4 {
            return Err(Error::Shape(format!("rank {} exceeds 4", shape.len())));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn scalar(x: f64) -> Self {
        Tensor { shape: Vec::new(), data: vec![x] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    /// Uniform in `[-limit, limit]`.
    pub fn uniform(shape: &[usize], limit: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the leading axis and of one slice along it.
    pub(crate) fn split_leading(&self) -> (usize, usize) {
        match self.shape.first() {
            Some(&c) if c > 0 => (c, self.data.len() / c),
            _ => (1, self.data.len()),
        }
    }
}
