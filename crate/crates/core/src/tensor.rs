//! Dense rank-3 and rank-4 arrays over a common dimension.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    t[(a, b, c)] = f(a, b, c);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.data[(a * self.n + b) * self.n + c]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(a * self.n + b) * self.n + c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor4::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        t[(a, b, c, d)] = f(a, b, c, d);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (a, b, c, d): (usize, usize, usize, usize)) -> &f64 {
        &self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (a, b, c, d): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn matrix_max_abs(m: &DMatrix<f64>) -> f64 {
    max_abs(m.as_slice())
}

/// Residual normalization shared by every check: the largest discrepancy
/// divided by one plus the largest magnitude of the compared quantities.
pub fn scaled_residual(diff: f64, scale: f64) -> f64 {
    diff / (1.0 + scale)
}

/// `scaled_residual` for two equally shaped arrays.
pub fn compare(lhs: &[f64], rhs: &[f64]) -> f64 {
    scaled_residual(max_abs_diff(lhs, rhs), max_abs(lhs).max(max_abs(rhs)))
}
