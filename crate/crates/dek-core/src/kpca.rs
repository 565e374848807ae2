//! Kernel principal component analysis over a precomputed Gram matrix.
//!
//! The training Gram is double-centered, eigendecomposed, and negative
//! eigenvalues are clamped to zero and dropped from selection — the learned
//! kernel carries no positive-semidefiniteness guarantee, so indefinite
//! directions are discarded rather than trusted.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{DekError, Result};
use crate::gram::GramMatrix;
use crate::matrix::Matrix;

/// Eigenvalues at or below this floor count as "no variance".
const POSITIVE_EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KpcaModel {
    /// Retained eigenvalues, nonincreasing, all > 0.
    eigenvalues: Vec<f64>,
    /// n × m matrix whose column k is v_k / sqrt(λ_k).
    scaled_eigenvectors: Matrix,
    /// Column means of the training Gram (equal to its row means).
    train_col_means: Vec<f64>,
    total_mean: f64,
    n_components: usize,
    /// Training-set coordinates frozen at fit time.
    train_coordinates: Matrix,
}

impl KpcaModel {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn train_coordinates(&self) -> &Matrix {
        &self.train_coordinates
    }

    pub fn train_size(&self) -> usize {
        self.train_col_means.len()
    }
}

/// Fits kernel PCA on a symmetric Gram matrix.
///
/// Retains the top `n_components` positive-eigenvalue components; when the
/// centered kernel has fewer positive directions, the retained count drops
/// to what exists. A kernel with no positive direction at all is an error.
pub fn kpca_fit(gram: &GramMatrix, n_components: usize) -> Result<KpcaModel> {
    if !gram.is_symmetric() {
        return Err(DekError::InvalidInput(
            "kernel PCA needs a self-Gram (symmetric) matrix".into(),
        ));
    }
    let n = gram.rows();
    if n == 0 {
        return Err(DekError::Empty("kernel PCA on an empty gram".into()));
    }
    if n_components == 0 || n_components > n {
        return Err(DekError::InvalidConfig(format!(
            "n_components must lie in 1..={n}, got {n_components}"
        )));
    }

    let col_means: Vec<f64> = (0..n)
        .map(|c| (0..n).map(|r| gram.get(r, c)).sum::<f64>() / n as f64)
        .collect();
    let total_mean = col_means.iter().sum::<f64>() / n as f64;

    let mut centered = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            centered[(r, c)] = gram.get(r, c) - col_means[r] - col_means[c] + total_mean;
        }
    }

    let eigen = SymmetricEigen::new(centered);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eigen.eigenvalues[i] > POSITIVE_EIGEN_FLOOR)
        .take(n_components)
        .collect();
    if keep.is_empty() {
        return Err(DekError::NoVariance);
    }

    let m = keep.len();
    let mut eigenvalues = Vec::with_capacity(m);
    let mut scaled = Matrix::zeros(n, m);
    for (k, &i) in keep.iter().enumerate() {
        let lambda = eigen.eigenvalues[i];
        eigenvalues.push(lambda);
        let col = eigen.eigenvectors.column(i);
        // Deterministic sign: the entry of largest magnitude is positive.
        let mut flip = 1.0;
        let mut best = 0.0f64;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                flip = if *v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        let scale = flip / lambda.sqrt();
        for r in 0..n {
            scaled.set(r, k, col[r] * scale);
        }
    }

    // Training coordinates: K_c · (v/sqrt(λ)) = sqrt(λ) v.
    let mut train_coordinates = Matrix::zeros(n, m);
    for (k, &i) in keep.iter().enumerate() {
        let lambda = eigen.eigenvalues[i];
        for r in 0..n {
            train_coordinates.set(r, k, scaled.get(r, k) * lambda);
        }
    }

    Ok(KpcaModel {
        eigenvalues,
        scaled_eigenvectors: scaled,
        train_col_means: col_means,
        total_mean,
        n_components: m,
        train_coordinates,
    })
}

/// Projects query samples given their cross Gram against the training set
/// (queries × training). Projecting the training Gram itself reproduces the
/// fit-time coordinates.
pub fn kpca_project(model: &KpcaModel, cross: &GramMatrix) -> Result<Matrix> {
    let n = model.train_col_means.len();
    if cross.cols() != n {
        return Err(DekError::DimensionMismatch {
            context: "kpca projection cross gram".into(),
            expected: n,
            actual: cross.cols(),
        });
    }
    let q = cross.rows();
    let m = model.n_components;
    let mut coords = Matrix::zeros(q, m);
    let mut centered_row = vec![0.0; n];
    for r in 0..q {
        let row = cross.row(r);
        let row_mean = row.iter().sum::<f64>() / n as f64;
        for (i, cr) in centered_row.iter_mut().enumerate() {
            *cr = row[i] - row_mean - model.train_col_means[i] + model.total_mean;
        }
        for k in 0..m {
            let mut acc = 0.0;
            for i in 0..n {
                acc += centered_row[i] * model.scaled_eigenvectors.get(i, k);
            }
            coords.set(r, k, acc);
        }
    }
    Ok(coords)
}
