//! Kernel K-nearest-neighbor classification and regression.
//!
//! The learned kernel outputs similarities, not distances, so neighbors are
//! the training samples with the LARGEST kernel values.

use crate::error::{DekError, Result};

/// Indices of the k most similar entries: descending value, ties broken by
/// ascending index.
fn top_k(row: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).expect("finite kernel values"));
    order.truncate(k);
    order
}

fn check(row: &[f64], n_targets: usize, k: usize) -> Result<()> {
    if row.is_empty() {
        return Err(DekError::Empty("knn over an empty gram row".into()));
    }
    if k == 0 {
        return Err(DekError::InvalidConfig("k must be positive".into()));
    }
    if k > row.len() {
        return Err(DekError::InvalidConfig(format!(
            "k = {k} exceeds the {} training samples",
            row.len()
        )));
    }
    if n_targets != row.len() {
        return Err(DekError::DimensionMismatch {
            context: "knn training targets".into(),
            expected: row.len(),
            actual: n_targets,
        });
    }
    Ok(())
}

/// Majority class among the k most similar training samples. A vote tie is
/// broken in favor of the tied class whose member ranks most similar.
pub fn knn_classify(gram_row: &[f64], train_labels: &[usize], k: usize) -> Result<usize> {
    check(gram_row, train_labels.len(), k)?;
    let neighbors = top_k(gram_row, k);
    let max_class = *train_labels.iter().max().expect("non-empty");
    let mut votes = vec![0usize; max_class + 1];
    for &i in &neighbors {
        votes[train_labels[i]] += 1;
    }
    let best_count = *votes.iter().max().expect("non-empty");
    // neighbors is similarity-ranked; the first member of a tied class wins.
    let winner = neighbors
        .iter()
        .map(|&i| train_labels[i])
        .find(|&c| votes[c] == best_count)
        .expect("some class holds the max vote");
    Ok(winner)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnWeighting {
    /// Unweighted mean of the k neighbor targets.
    Uniform,
    /// Mean weighted by kernel value (falls back to uniform when the
    /// weights sum to zero).
    Similarity,
}

/// Mean target of the k most similar training samples.
pub fn knn_regress(
    gram_row: &[f64],
    train_targets: &[f64],
    k: usize,
    weighting: KnnWeighting,
) -> Result<f64> {
    check(gram_row, train_targets.len(), k)?;
    let neighbors = top_k(gram_row, k);
    match weighting {
        KnnWeighting::Uniform => {
            Ok(neighbors.iter().map(|&i| train_targets[i]).sum::<f64>() / k as f64)
        }
        KnnWeighting::Similarity => {
            let total: f64 = neighbors.iter().map(|&i| gram_row[i]).sum();
            if total <= 0.0 {
                return knn_regress(gram_row, train_targets, k, KnnWeighting::Uniform);
            }
            Ok(neighbors
                .iter()
                .map(|&i| gram_row[i] * train_targets[i])
                .sum::<f64>()
                / total)
        }
    }
}
