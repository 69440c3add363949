//! Skeleton adjacency, k-hop reachability and row-normalised graph operators.

use crate::error::{Error, Result};
use crate::topology::SkeletonTopology;

/// Square 0/1 matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    data: Vec<bool>,
}

impl BinaryMatrix {
    pub fn zeros(n: usize) -> Self {
        BinaryMatrix { n, data: vec![false; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Shape(format!("row {i} has {} entries, expected {n}", r.len())));
            }
            for (j, &x) in r.iter().enumerate() {
                m.set(i, j, x != 0);
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: bool) {
        self.data[i * self.n + j] = x;
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.data[i * self.n..(i + 1) * self.n].iter().filter(|&&x| x).count()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j) as u8).collect()).collect()
    }

    /// Boolean product: `(i, j)` is set iff some `k` has `self[i][k] && rhs[k][j]`.
    pub fn bool_mul(&self, rhs: &BinaryMatrix) -> BinaryMatrix {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in (0..n).filter(|&k| self.get(i, k)) {
                for j in 0..n {
                    if rhs.get(k, j) {
                        out.set(i, j, true);
                    }
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Dense square real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Bones plus self-loops.
pub fn build_adjacency(topology: &SkeletonTopology) -> BinaryMatrix {
    let mut a = BinaryMatrix::identity(topology.num_joints());
    for &(i, j) in topology.edges() {
        a.set(i, j, true);
        a.set(j, i, true);
    }
    a
}

/// Indicator of graph distance `<= k`, as a binarised power of `a`
/// (which must carry self-loops).
pub fn k_hop_reachability(a: &BinaryMatrix, k: usize) -> Result<BinaryMatrix> {
    if k == 0 {
        return Err(Error::Config("k-hop reachability needs k >= 1".into()));
    }
    let mut r = a.clone();
    for _ in 1..k {
        r = r.bool_mul(a);
    }
    Ok(r)
}

/// `D⁻¹ B`: each row divided by its number of set entries.
pub fn normalize_rows(b: &BinaryMatrix) -> Result<Matrix> {
    let n = b.n();
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        let s = b.row_sum(i);
        if s == 0 {
            return Err(Error::Shape(format!("row {i} has no entries, cannot normalise")));
        }
        let w = 1.0 / s as f64;
        for j in 0..n {
            if b.get(i, j) {
                out.data[i * n + j] = w;
            }
        }
    }
    Ok(out)
}

/// One scale of the multiscale spatial graph convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphOperator {
    pub scale: usize,
    pub base: BinaryMatrix,
    pub normalized: Matrix,
    /// Initial value of the learnable additive mask (all zeros).
    pub mask: Matrix,
}

impl GraphOperator {
    pub fn new(adjacency: &BinaryMatrix, scale: usize) -> Result<Self> {
        let base = k_hop_reachability(adjacency, scale)?;
        let normalized = normalize_rows(&base)?;
        Ok(GraphOperator { scale, mask: Matrix::zeros(base.n()), base, normalized })
    }

    /// `normalized + mask`, row-major.
    pub fn effective(&self) -> Vec<f64> {
        self.normalized.data.iter().zip(&self.mask.data).map(|(a, b)| a + b).collect()
    }
}

/// Operators for scales `1..=k`.
pub fn build_operators(topology: &SkeletonTopology, k: usize) -> Result<Vec<GraphOperator>> {
    if k == 0 {
        return Err(Error::Config("number of graph scales K must be at least 1".into()));
    }
    let a = build_adjacency(topology);
    (1..=k).map(|s| GraphOperator::new(&a, s)).collect()
}
