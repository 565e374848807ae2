//! Training-pair generation: exhaustive pairing over a labeled set and the
//! local pairing strategy that restricts pairs to each reference sample's
//! kernel-ranked neighborhood.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{DekError, Result};
use crate::gram::GramMatrix;
use crate::loss::regression_target;
use crate::matrix::Matrix;
use crate::model::DekModel;

/// Index pairs into a dataset with per-pair targets: binary same-class
/// labels for classification, `exp(-γ|Δy|)` values for regression.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pairs: Vec<(usize, usize)>,
    targets: Vec<f64>,
}

impl PairBatch {
    fn new(pairs: Vec<(usize, usize)>, targets: Vec<f64>) -> Self {
        debug_assert_eq!(pairs.len(), targets.len());
        debug_assert!(pairs.iter().all(|&(i, j)| i != j));
        PairBatch { pairs, targets }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.pairs.iter().copied().zip(self.targets.iter().copied())
    }

    /// Set view of the unordered pairs, for subset/equality checks.
    pub fn pair_set(&self) -> HashSet<(usize, usize)> {
        self.pairs.iter().copied().collect()
    }
}

/// All n(n-1)/2 unordered pairs; target 1 iff the class labels match.
pub fn make_pairs_full(labels: &[usize]) -> Result<PairBatch> {
    if labels.len() < 2 {
        return Err(DekError::InvalidInput(format!(
            "pairing needs at least 2 samples, got {}",
            labels.len()
        )));
    }
    let n = labels.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut targets = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
            targets.push(if labels[i] == labels[j] { 1.0 } else { 0.0 });
        }
    }
    Ok(PairBatch::new(pairs, targets))
}

/// All unordered pairs of a regression set, targeted with
/// `exp(-γ|y_i - y_j|)`.
pub fn make_pairs_regression(values: &[f64], gamma: f64) -> Result<PairBatch> {
    if values.len() < 2 {
        return Err(DekError::InvalidInput(format!(
            "pairing needs at least 2 samples, got {}",
            values.len()
        )));
    }
    let n = values.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut targets = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
            targets.push(regression_target(values[i], values[j], gamma)?);
        }
    }
    Ok(PairBatch::new(pairs, targets))
}

/// Local pairing against an already computed symmetric Gram matrix.
///
/// Each sample in turn is the reference; all other samples are ranked by
/// descending kernel value (ties broken by ascending index) and the
/// neighborhood is the smallest ranked prefix containing a fraction
/// `recall_level` of the reference's same-class samples. Within the
/// neighborhood, same-class samples become positive pairs and
/// different-class samples negative pairs. Unordered duplicates keep their
/// first occurrence.
///
/// A reference whose class has no other member has no recall target; it
/// falls back to a neighborhood of the nearest `ceil(recall_level · (n-1))`
/// samples and so contributes only negative pairs.
pub fn local_pairs_from_gram(
    gram: &GramMatrix,
    labels: &[usize],
    recall_level: f64,
) -> Result<PairBatch> {
    if !gram.is_symmetric() || gram.rows() != labels.len() {
        return Err(DekError::DimensionMismatch {
            context: "local pairing gram".into(),
            expected: labels.len(),
            actual: gram.rows(),
        });
    }
    if labels.len() < 2 {
        return Err(DekError::InvalidInput(format!(
            "pairing needs at least 2 samples, got {}",
            labels.len()
        )));
    }
    if !(recall_level > 0.0 && recall_level <= 1.0) {
        return Err(DekError::InvalidConfig(format!(
            "recall_level must lie in (0, 1], got {recall_level}"
        )));
    }
    let n = labels.len();

    let mut pairs = Vec::new();
    let mut targets = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut ranked: Vec<usize> = Vec::with_capacity(n - 1);

    for r in 0..n {
        ranked.clear();
        ranked.extend((0..n).filter(|&i| i != r));
        let row = gram.row(r);
        // Stable sort on an ascending-index list: equal kernel values keep
        // ascending index order.
        ranked.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).expect("finite kernel values"));

        let same_total = ranked.iter().filter(|&&i| labels[i] == labels[r]).count();
        let cutoff = if same_total > 0 {
            let required = ((recall_level * same_total as f64).ceil() as usize).max(1);
            let mut found = 0;
            let mut len = ranked.len();
            for (pos, &i) in ranked.iter().enumerate() {
                if labels[i] == labels[r] {
                    found += 1;
                    if found == required {
                        len = pos + 1;
                        break;
                    }
                }
            }
            len
        } else {
            ((recall_level * (n - 1) as f64).ceil() as usize).clamp(1, ranked.len())
        };

        for &i in &ranked[..cutoff] {
            let key = (r.min(i), r.max(i));
            if seen.insert(key) {
                pairs.push(key);
                targets.push(if labels[i] == labels[r] { 1.0 } else { 0.0 });
            }
        }
    }
    Ok(PairBatch::new(pairs, targets))
}

/// Local pairing under the current model: evaluates the training-set Gram
/// and delegates to [`local_pairs_from_gram`].
pub fn make_pairs_local(
    model: &DekModel,
    features: &Matrix,
    labels: &[usize],
    recall_level: f64,
) -> Result<PairBatch> {
    if labels.len() != features.rows() {
        return Err(DekError::DimensionMismatch {
            context: "local pairing labels".into(),
            expected: features.rows(),
            actual: labels.len(),
        });
    }
    let gram = model.gram_self(features)?;
    local_pairs_from_gram(&gram, labels, recall_level)
}

/// Caps how many pairs any single sample participates in. Pairs are visited
/// in a seeded random order and kept greedily while both endpoints are
/// under the cap, so the result is deterministic for a fixed seed.
pub fn cap_pairs_per_reference<R: Rng + ?Sized>(
    batch: &PairBatch,
    cap: usize,
    rng: &mut R,
) -> Result<PairBatch> {
    if cap == 0 {
        return Err(DekError::InvalidConfig("pair cap must be positive".into()));
    }
    let max_index = batch
        .pairs
        .iter()
        .map(|&(i, j)| i.max(j))
        .max()
        .unwrap_or(0);
    let mut counts = vec![0usize; max_index + 1];
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.shuffle(rng);
    let mut keep: Vec<usize> = order
        .into_iter()
        .filter(|&idx| {
            let (i, j) = batch.pairs[idx];
            if counts[i] < cap && counts[j] < cap {
                counts[i] += 1;
                counts[j] += 1;
                true
            } else {
                false
            }
        })
        .collect();
    keep.sort_unstable();
    Ok(PairBatch::new(
        keep.iter().map(|&idx| batch.pairs[idx]).collect(),
        keep.iter().map(|&idx| batch.targets[idx]).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DekArchitecture, Task};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_pairing_follows_the_label_rule() {
        let batch = make_pairs_full(&[0, 1, 0]).unwrap();
        assert_eq!(batch.pairs(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(batch.targets(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn full_pairing_single_class_is_all_positive() {
        let batch = make_pairs_full(&[3, 3, 3, 3, 3]).unwrap();
        assert_eq!(batch.len(), 10);
        assert!(batch.targets().iter().all(|&t| t == 1.0));
    }

    #[test]
    fn full_pairing_counts_unordered_pairs() {
        assert_eq!(make_pairs_full(&[0, 1, 2, 0]).unwrap().len(), 6);
    }

    #[test]
    fn full_pairing_needs_two_samples() {
        assert!(make_pairs_full(&[0]).is_err());
    }

    fn hand_gram() -> GramMatrix {
        let k = vec![
            1.0, 0.9, 0.2, 0.8, 0.1, 0.3, //
            0.9, 1.0, 0.4, 0.35, 0.15, 0.25, //
            0.2, 0.4, 1.0, 0.5, 0.45, 0.05, //
            0.8, 0.35, 0.5, 1.0, 0.6, 0.55, //
            0.1, 0.15, 0.45, 0.6, 1.0, 0.7, //
            0.3, 0.25, 0.05, 0.55, 0.7, 1.0,
        ];
        GramMatrix::new_symmetric(Matrix::from_vec(6, 6, k).unwrap()).unwrap()
    }

    #[test]
    fn six_point_hand_gram_matches_hand_enumeration() {
        // labels [0,0,0,1,1,1], recall 0.5 -> each reference needs 1 of its
        // 2 same-class samples. Rankings and neighborhoods by hand:
        //   ref 0: 1(.9) -> stop            => (0,1)+
        //   ref 1: 0(.9) -> stop            => dup
        //   ref 2: 3(.5), 4(.45), 1(.4)     => (2,3)-, (2,4)-, (1,2)+
        //   ref 3: 0(.8), 4(.6)             => (0,3)-, (3,4)+
        //   ref 4: 5(.7) -> stop            => (4,5)+
        //   ref 5: 4(.7) -> stop            => dup
        let labels = vec![0, 0, 0, 1, 1, 1];
        let batch = local_pairs_from_gram(&hand_gram(), &labels, 0.5).unwrap();
        assert_eq!(
            batch.pairs(),
            &[(0, 1), (2, 3), (2, 4), (1, 2), (0, 3), (3, 4), (4, 5)]
        );
        assert_eq!(batch.targets(), &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
    }

    fn toy_model(seed: u64) -> DekModel {
        DekModel::new(DekArchitecture::new(2, Task::Classification), seed).unwrap()
    }

    fn toy_features(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_rows(
            &(0..n)
                .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn full_recall_with_covering_neighborhoods_equals_full_pairing() {
        // With a single class every neighborhood runs to the last ranked
        // same-class sample, i.e. the whole ranking.
        let model = toy_model(0);
        let features = toy_features(6, 4);
        let labels = vec![1usize; 6];
        let local = make_pairs_local(&model, &features, &labels, 1.0).unwrap();
        let full = make_pairs_full(&labels).unwrap();
        assert_eq!(local.pair_set(), full.pair_set());
    }

    #[test]
    fn local_pairing_is_a_subset_of_full_pairing() {
        let model = toy_model(5);
        let features = toy_features(10, 9);
        let labels = vec![0, 1, 0, 1, 2, 2, 0, 1, 2, 0];
        for recall in [0.2, 0.5, 0.9, 1.0] {
            let local = make_pairs_local(&model, &features, &labels, recall).unwrap();
            let full = make_pairs_full(&labels).unwrap();
            assert!(local.pair_set().is_subset(&full.pair_set()));
            for ((i, j), t) in local.iter() {
                assert_eq!(t, if labels[i] == labels[j] { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constant_kernel_breaks_ties_by_ascending_index() {
        // A zero-parameter model outputs the same similarity everywhere, so
        // the ranking degenerates to ascending sample index.
        let mut model = toy_model(1);
        for l in model.embedding_mut().layers_mut() {
            l.weights.data_mut().fill(0.0);
            l.biases.fill(0.0);
        }
        for l in model.kernel_mut().layers_mut() {
            l.weights.data_mut().fill(0.0);
            l.biases.fill(0.0);
        }
        let features = toy_features(6, 2);
        let labels = vec![0, 0, 1, 1, 0, 1];
        // Every ranking is 0,1,2,3,4,5 minus the reference; recall 0.5 needs
        // 1 of each reference's 2 same-class samples. Hand enumeration:
        //   ref 0: {1}        => (0,1)+
        //   ref 1: {0}        => dup
        //   ref 2: {0,1,3}    => (0,2)-, (1,2)-, (2,3)+
        //   ref 3: {0,1,2}    => (0,3)-, (1,3)-, dup
        //   ref 4: {0}        => (0,4)+
        //   ref 5: {0,1,2}    => (0,5)-, (1,5)-, (2,5)+
        let batch = make_pairs_local(&model, &features, &labels, 0.5).unwrap();
        assert_eq!(
            batch.pairs(),
            &[
                (0, 1),
                (0, 2),
                (1, 2),
                (2, 3),
                (0, 3),
                (1, 3),
                (0, 4),
                (0, 5),
                (1, 5),
                (2, 5)
            ]
        );
        assert_eq!(
            batch.targets(),
            &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]
        );
        let again = make_pairs_local(&model, &features, &labels, 0.5).unwrap();
        assert_eq!(batch, again);
    }

    #[test]
    fn singleton_class_contributes_only_negative_pairs() {
        let model = toy_model(3);
        let features = toy_features(5, 7);
        let labels = vec![0, 0, 0, 0, 9];
        let batch = make_pairs_local(&model, &features, &labels, 1.0).unwrap();
        let negatives: Vec<_> = batch
            .iter()
            .filter(|((i, j), _)| *i == 4 || *j == 4)
            .collect();
        assert!(!negatives.is_empty());
        assert!(negatives.iter().all(|(_, t)| *t == 0.0));
    }

    #[test]
    fn recall_level_must_be_in_unit_interval() {
        let model = toy_model(0);
        let features = toy_features(4, 0);
        assert!(make_pairs_local(&model, &features, &[0, 1, 0, 1], 0.0).is_err());
        assert!(make_pairs_local(&model, &features, &[0, 1, 0, 1], 1.5).is_err());
    }

    #[test]
    fn cap_bounds_pair_participation() {
        let batch = make_pairs_full(&[0, 0, 0, 0, 0, 0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let capped = cap_pairs_per_reference(&batch, 2, &mut rng).unwrap();
        let mut counts = [0usize; 6];
        for ((i, j), _) in capped.iter() {
            counts[i] += 1;
            counts[j] += 1;
        }
        assert!(counts.iter().all(|&c| c <= 2));
        assert!(capped.len() < batch.len());
        let mut rng2 = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(capped, cap_pairs_per_reference(&batch, 2, &mut rng2).unwrap());
    }
}
