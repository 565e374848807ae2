//! A rectangular block of kernel evaluations between two sample sets.

use serde::{Deserialize, Serialize};

use crate::error::{DekError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    values: Matrix,
    symmetric: bool,
}

impl GramMatrix {
    /// Wraps kernel values computed between two distinct sets.
    pub fn new(values: Matrix) -> Result<Self> {
        Self::build(values, false)
    }

    /// Wraps kernel values computed on one set against itself. The matrix
    /// must be square and exactly equal to its transpose.
    pub fn new_symmetric(values: Matrix) -> Result<Self> {
        Self::build(values, true)
    }

    fn build(values: Matrix, symmetric: bool) -> Result<Self> {
        for r in 0..values.rows() {
            for c in 0..values.cols() {
                let v = values.get(r, c);
                if !v.is_finite() || v < 0.0 {
                    return Err(DekError::InvalidInput(format!(
                        "kernel value at ({r},{c}) is {v}; entries must be finite and >= 0"
                    )));
                }
            }
        }
        if symmetric {
            if values.rows() != values.cols() {
                return Err(DekError::DimensionMismatch {
                    context: "symmetric gram matrix".into(),
                    expected: values.rows(),
                    actual: values.cols(),
                });
            }
            for r in 0..values.rows() {
                for c in (r + 1)..values.cols() {
                    if values.get(r, c) != values.get(c, r) {
                        return Err(DekError::InvalidInput(format!(
                            "gram matrix marked symmetric differs at ({r},{c})"
                        )));
                    }
                }
            }
        }
        Ok(GramMatrix { values, symmetric })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values.get(r, c)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.values.row(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_entries() {
        let m = Matrix::from_vec(1, 2, vec![0.5, -0.1]).unwrap();
        assert!(GramMatrix::new(m).is_err());
    }

    #[test]
    fn rejects_asymmetric_matrix_marked_symmetric() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 0.3, 0.4, 1.0]).unwrap();
        assert!(GramMatrix::new_symmetric(m).is_err());
    }

    #[test]
    fn empty_sets_make_an_empty_matrix() {
        let g = GramMatrix::new(Matrix::zeros(0, 0)).unwrap();
        assert_eq!(g.rows(), 0);
    }
}
