//! Ranking-based identity evaluation: each query ranks the reference set by
//! descending similarity and precision is read off at a fixed recall grid.

use crate::error::{DekError, Result};
use crate::gram::GramMatrix;

/// 20-point recall grid, 0.05 steps.
pub fn recall_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub recall: Vec<f64>,
    pub mean_precision: Vec<f64>,
    /// Queries skipped because no reference shares their class.
    pub skipped_queries: usize,
}

/// Averaged precision-recall curve over all queries. For each query the
/// references sort by descending similarity (ties by ascending index);
/// precision at recall level t is measured at the smallest ranked prefix
/// containing ceil(t · positives) same-class references.
pub fn rank_and_pr_curve(
    gram: &GramMatrix,
    query_labels: &[usize],
    reference_labels: &[usize],
) -> Result<PrCurve> {
    if gram.rows() != query_labels.len() {
        return Err(DekError::DimensionMismatch {
            context: "pr-curve query labels".into(),
            expected: gram.rows(),
            actual: query_labels.len(),
        });
    }
    if gram.cols() != reference_labels.len() {
        return Err(DekError::DimensionMismatch {
            context: "pr-curve reference labels".into(),
            expected: gram.cols(),
            actual: reference_labels.len(),
        });
    }
    if gram.rows() == 0 || gram.cols() == 0 {
        return Err(DekError::Empty("pr-curve over empty sets".into()));
    }

    let grid = recall_grid();
    let mut sums = vec![0.0; grid.len()];
    let mut used = 0usize;
    let mut skipped = 0usize;

    for (q, &qlabel) in query_labels.iter().enumerate() {
        let positives = reference_labels.iter().filter(|&&r| r == qlabel).count();
        if positives == 0 {
            skipped += 1;
            continue;
        }
        let row = gram.row(q);
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).expect("finite kernel values"));

        // prefix_for_hits[h] = 1-based prefix length at which the (h+1)-th
        // same-class reference appears.
        let mut prefix_for_hits = Vec::with_capacity(positives);
        for (pos, &r) in order.iter().enumerate() {
            if reference_labels[r] == qlabel {
                prefix_for_hits.push(pos + 1);
                if prefix_for_hits.len() == positives {
                    break;
                }
            }
        }
        for (slot, &t) in grid.iter().enumerate() {
            let needed = ((t * positives as f64).ceil() as usize).clamp(1, positives);
            let prefix = prefix_for_hits[needed - 1];
            sums[slot] += needed as f64 / prefix as f64;
        }
        used += 1;
    }

    if used == 0 {
        return Err(DekError::InvalidInput(
            "every query lacked a same-class reference".into(),
        ));
    }
    Ok(PrCurve {
        recall: grid,
        mean_precision: sums.iter().map(|s| s / used as f64).collect(),
        skipped_queries: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn gram(rows: &[Vec<f64>]) -> GramMatrix {
        GramMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn perfect_ranking_has_unit_precision_everywhere() {
        // Same-class references carry the highest similarities.
        let g = gram(&[vec![0.9, 0.8, 0.2, 0.1]]);
        let curve = rank_and_pr_curve(&g, &[0], &[0, 0, 1, 1]).unwrap();
        assert!(curve.mean_precision.iter().all(|&p| p == 1.0));
        assert_eq!(curve.skipped_queries, 0);
    }

    #[test]
    fn reversed_ranking_of_one_positive_gives_one_over_n() {
        let n = 5;
        // The single positive is the LEAST similar reference.
        let g = gram(&[vec![0.9, 0.8, 0.7, 0.6, 0.1]]);
        let refs = vec![1, 1, 1, 1, 0];
        let curve = rank_and_pr_curve(&g, &[0], &refs).unwrap();
        let last = *curve.mean_precision.last().unwrap();
        assert!((last - 1.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn five_query_toy_gram_matches_hand_enumeration() {
        // 3 references of classes [0, 1, 0]; 5 queries.
        let g = gram(&[
            vec![0.9, 0.5, 0.4], // q0 class 0: ranking r0,r1,r2
            vec![0.2, 0.8, 0.3], // q1 class 1: ranking r1,r2,r0
            vec![0.3, 0.9, 0.5], // q2 class 0: ranking r1,r2,r0
            vec![0.6, 0.1, 0.7], // q3 class 0: ranking r2,r0,r1
            vec![0.5, 0.5, 0.5], // q4 class 1: tie -> r0,r1,r2
        ]);
        let curve = rank_and_pr_curve(&g, &[0, 1, 0, 0, 1], &[0, 1, 0]).unwrap();
        // Positives per query: q0 2, q1 1, q2 2, q3 2, q4 1.
        // Precision at recall 0.5 (needed: q0 1, q1 1, q2 1, q3 1, q4 1):
        //   q0: first hit at prefix 1 -> 1.0
        //   q1: r1 at prefix 1 -> 1.0
        //   q2: first class-0 ref in ranking r1,r2,r0 is r2 at prefix 2 -> 0.5
        //   q3: r2 at prefix 1 -> 1.0
        //   q4: r1 at prefix 2 -> 0.5
        let idx_half = curve.recall.iter().position(|&r| r == 0.5).unwrap();
        assert!((curve.mean_precision[idx_half] - 0.8).abs() < 1e-12);
        // Precision at recall 1.0 (needed: q0 2, q1 1, q2 2, q3 2, q4 1):
        //   q0: second hit at prefix 3 -> 2/3
        //   q1: 1.0
        //   q2: second class-0 hit (r0) at prefix 3 -> 2/3
        //   q3: second hit (r0) at prefix 2 -> 1.0
        //   q4: 0.5
        let idx_full = curve.recall.iter().position(|&r| r == 1.0).unwrap();
        let expected = (2.0 / 3.0 + 1.0 + 2.0 / 3.0 + 1.0 + 0.5) / 5.0;
        assert!((curve.mean_precision[idx_full] - expected).abs() < 1e-12);
    }

    #[test]
    fn orphan_queries_are_skipped_with_a_count() {
        let g = gram(&[vec![0.9, 0.8], vec![0.1, 0.2]]);
        let curve = rank_and_pr_curve(&g, &[0, 7], &[0, 0]).unwrap();
        assert_eq!(curve.skipped_queries, 1);
    }

    #[test]
    fn all_orphan_queries_is_an_error() {
        let g = gram(&[vec![0.9, 0.8]]);
        assert!(rank_and_pr_curve(&g, &[5], &[0, 0]).is_err());
    }
}
