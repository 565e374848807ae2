//! Soft-margin SVM over a precomputed kernel, solved by sequential minimal
//! optimization with Platt's second-choice heuristic, plus one-vs-rest
//! multiclass on top.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DekError, Result};
use crate::gram::GramMatrix;

/// Outer-sweep cap.
const MAX_PASSES: usize = 10_000;
/// Minimum significant change in an alpha during a step.
const STEP_EPSILON: f64 = 1e-12;
/// Internal seed for the fallback scan order; fixed so identical inputs
/// give identical runs.
const SCAN_SEED: u64 = 0x5e0_c0de;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// α_p · y_p for each support sample.
    pub dual_coefs: Vec<f64>,
    /// Indices of the support samples in the training set.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub c: f64,
    pub converged: bool,
}

impl SvmModel {
    /// Decision value for one query given its kernel row against the
    /// training set.
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.dual_coefs
            .iter()
            .zip(&self.support_indices)
            .map(|(coef, &p)| coef * kernel_row[p])
            .sum::<f64>()
            + self.bias
    }

    /// Decision values over a (queries × training) cross Gram.
    pub fn decision_values(&self, cross: &GramMatrix) -> Result<Vec<f64>> {
        if let Some(&max_idx) = self.support_indices.iter().max() {
            if max_idx >= cross.cols() {
                return Err(DekError::DimensionMismatch {
                    context: "svm decision cross gram".into(),
                    expected: max_idx + 1,
                    actual: cross.cols(),
                });
            }
        }
        Ok((0..cross.rows()).map(|q| self.decision(cross.row(q))).collect())
    }

    /// Dense alphas (training-set length), for diagnostics and tests.
    pub fn dense_alphas(&self, n_train: usize) -> Vec<f64> {
        let mut alphas = vec![0.0; n_train];
        for (coef, &p) in self.dual_coefs.iter().zip(&self.support_indices) {
            alphas[p] = coef.abs();
        }
        alphas
    }
}

/// Dual objective W(α) = Σα − ½ ΣΣ α_i α_j y_i y_j K_ij.
pub fn dual_objective(gram: &GramMatrix, labels: &[f64], alphas: &[f64]) -> f64 {
    let n = labels.len();
    let w: f64 = alphas.iter().sum();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alphas[j] == 0.0 {
                continue;
            }
            quad += alphas[i] * alphas[j] * labels[i] * labels[j] * gram.get(i, j);
        }
    }
    w - 0.5 * quad
}

/// Largest KKT violation of the model on its training data.
pub fn max_kkt_violation(model: &SvmModel, gram: &GramMatrix, labels: &[f64]) -> f64 {
    let n = labels.len();
    let alphas = model.dense_alphas(n);
    let mut worst = 0.0f64;
    for i in 0..n {
        let margin = labels[i] * model.decision(gram.row(i));
        let v = if alphas[i] <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if alphas[i] >= model.c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

struct Smo<'a> {
    gram: &'a GramMatrix,
    labels: &'a [f64],
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    bias: f64,
    /// Current decision value per training sample (kept incrementally).
    decisions: Vec<f64>,
    rng: ChaCha8Rng,
}

impl<'a> Smo<'a> {
    fn error(&self, i: usize) -> f64 {
        self.decisions[i] - self.labels[i]
    }

    fn non_bound(&self) -> Vec<usize> {
        (0..self.alphas.len())
            .filter(|&i| self.alphas[i] > 0.0 && self.alphas[i] < self.c)
            .collect()
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.labels[i1], self.labels[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;
        let (low, high) = if (y1 - y2).abs() > 0.5 {
            // opposite labels
            ((a2_old - a1_old).max(0.0), (self.c + a2_old - a1_old).min(self.c))
        } else {
            ((a1_old + a2_old - self.c).max(0.0), (a1_old + a2_old).min(self.c))
        };
        if low >= high {
            return false;
        }
        let k11 = self.gram.get(i1, i1);
        let k12 = self.gram.get(i1, i2);
        let k22 = self.gram.get(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;

        let mut a2_new = if eta > 0.0 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(low, high)
        } else {
            // Degenerate curvature: evaluate the objective at both ends.
            let f1 = y1 * e1 - a1_old * k11 - s * a2_old * k12;
            let f2 = y2 * e2 - s * a1_old * k12 - a2_old * k22;
            let l1 = a1_old + s * (a2_old - low);
            let h1 = a1_old + s * (a2_old - high);
            let obj_low = l1 * f1 + low * f2 + 0.5 * l1 * l1 * k11 + 0.5 * low * low * k22
                + s * low * l1 * k12;
            let obj_high = h1 * f1 + high * f2 + 0.5 * h1 * h1 * k11 + 0.5 * high * high * k22
                + s * high * h1 * k12;
            if obj_low < obj_high - STEP_EPSILON {
                low
            } else if obj_low > obj_high + STEP_EPSILON {
                high
            } else {
                return false;
            }
        };
        if (a2_new - a2_old).abs() < STEP_EPSILON * (a2_new + a2_old + STEP_EPSILON) {
            return false;
        }
        // Snap to the box to keep support detection exact.
        if a2_new < 1e-10 {
            a2_new = 0.0;
        } else if a2_new > self.c - 1e-10 {
            a2_new = self.c;
        }
        let mut a1_new = a1_old + s * (a2_old - a2_new);
        if a1_new < 1e-10 {
            a1_new = 0.0;
        } else if a1_new > self.c - 1e-10 {
            a1_new = self.c;
        }

        let d1 = y1 * (a1_new - a1_old);
        let d2 = y2 * (a2_new - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1_new > 0.0 && a1_new < self.c {
            b1
        } else if a2_new > 0.0 && a2_new < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = new_bias - self.bias;

        for k in 0..self.decisions.len() {
            self.decisions[k] += d1 * self.gram.get(i1, k) + d2 * self.gram.get(i2, k) + db;
        }
        self.alphas[i1] = a1_new;
        self.alphas[i2] = a2_new;
        self.bias = new_bias;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.labels[i2];
        let a2 = self.alphas[i2];
        let e2 = self.error(i2);
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0);
        if !violates {
            return false;
        }
        // Second-choice heuristic: maximize |E1 - E2| over non-bound alphas.
        let non_bound = self.non_bound();
        if non_bound.len() > 1 {
            let mut best = None;
            let mut best_gap = -1.0;
            for &i1 in &non_bound {
                let gap = (self.error(i1) - e2).abs();
                if gap > best_gap {
                    best_gap = gap;
                    best = Some(i1);
                }
            }
            if let Some(i1) = best {
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        // Fallback: all non-bound, then everything, in a seeded random order.
        let mut candidates = non_bound;
        candidates.shuffle(&mut self.rng);
        for i1 in candidates {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        let mut all: Vec<usize> = (0..self.alphas.len()).collect();
        all.shuffle(&mut self.rng);
        for i1 in all {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }
}

/// Trains a binary soft-margin SVM on a precomputed symmetric kernel.
/// Labels must be −1 or +1 and both classes must be present. Terminates
/// when a full sweep finds no KKT violation beyond `tol`, or flags the
/// model non-converged at the sweep cap.
pub fn smo_train(gram: &GramMatrix, labels: &[f64], c: f64, tol: f64) -> Result<SvmModel> {
    if !gram.is_symmetric() {
        return Err(DekError::InvalidInput("smo needs a symmetric training gram".into()));
    }
    let n = labels.len();
    if gram.rows() != n {
        return Err(DekError::DimensionMismatch {
            context: "smo labels".into(),
            expected: gram.rows(),
            actual: n,
        });
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(DekError::InvalidInput("smo labels must be -1 or +1".into()));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(DekError::InvalidInput("smo needs both classes present".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(DekError::InvalidConfig(format!("C must be a positive real, got {c}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(DekError::InvalidConfig(format!("tol must be a positive real, got {tol}")));
    }

    let mut solver = Smo {
        gram,
        labels,
        c,
        tol,
        alphas: vec![0.0; n],
        bias: 0.0,
        decisions: vec![0.0; n],
        rng: ChaCha8Rng::seed_from_u64(SCAN_SEED),
    };

    let mut examine_all = true;
    let mut passes = 0usize;
    let mut converged = false;
    while passes < MAX_PASSES {
        passes += 1;
        let mut changed = 0usize;
        if examine_all {
            for i in 0..n {
                if solver.examine(i) {
                    changed += 1;
                }
            }
        } else {
            for i in solver.non_bound() {
                if solver.examine(i) {
                    changed += 1;
                }
            }
        }
        if examine_all {
            if changed == 0 {
                converged = true;
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    let support_indices: Vec<usize> = (0..n).filter(|&i| solver.alphas[i] > 0.0).collect();
    let dual_coefs: Vec<f64> = support_indices
        .iter()
        .map(|&i| solver.alphas[i] * labels[i])
        .collect();
    Ok(SvmModel {
        dual_coefs,
        support_indices,
        bias: solver.bias,
        c,
        converged,
    })
}

/// One-vs-rest multiclass stack of binary SMO models.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvm {
    /// One head per class id in `classes`, same order.
    pub heads: Vec<SvmModel>,
    pub classes: Vec<usize>,
}

pub fn svm_train_one_vs_rest(
    gram: &GramMatrix,
    labels: &[usize],
    c: f64,
    tol: f64,
) -> Result<MulticlassSvm> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(DekError::InvalidInput("one-vs-rest needs at least two classes".into()));
    }
    let mut heads = Vec::with_capacity(classes.len());
    for &class in &classes {
        let binary: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        heads.push(smo_train(gram, &binary, c, tol)?);
    }
    Ok(MulticlassSvm { heads, classes })
}

/// Argmax of per-class decision values; ties go to the lowest class id.
pub fn svm_predict(model: &MulticlassSvm, cross: &GramMatrix) -> Result<Vec<usize>> {
    let per_head: Vec<Vec<f64>> = model
        .heads
        .iter()
        .map(|h| h.decision_values(cross))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(cross.rows());
    for q in 0..cross.rows() {
        let mut best_class = model.classes[0];
        let mut best_value = f64::NEG_INFINITY;
        for (head_idx, &class) in model.classes.iter().enumerate() {
            let v = per_head[head_idx][q];
            if v > best_value {
                best_value = v;
                best_class = class;
            }
        }
        out.push(best_class);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn linear_gram(points: &[Vec<f64>]) -> GramMatrix {
        let n = points.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum();
                m.set(i, j, dot.max(0.0));
            }
        }
        GramMatrix::new_symmetric(m).unwrap()
    }

    // Linear kernels produce negative dot products; route around the
    // GramMatrix nonneg invariant by shifting into feature space instead.
    fn linear_gram_shifted(points: &[Vec<f64>], shift: f64) -> (GramMatrix, Vec<Vec<f64>>) {
        let shifted: Vec<Vec<f64>> = points
            .iter()
            .map(|p| p.iter().map(|v| v + shift).collect())
            .collect();
        (linear_gram(&shifted), shifted)
    }

    #[test]
    fn two_point_analytic_solution() {
        // Points x = -1 (y = -1) and x = +1 (y = +1), linear kernel, C = 10.
        // Gram entries must be nonnegative, so train on inputs shifted by
        // +3 (x' ∈ {2, 4}); the bias absorbs the shift and the decision in
        // ORIGINAL coordinates is still exactly f(x) = x. Analytic dual:
        // maximize 2α - 2α² -> α1 = α2 = 1/2, w = 1, b = -3 in shifted
        // coordinates.
        let (gram, shifted) = linear_gram_shifted(&[vec![-1.0], vec![1.0]], 3.0);
        let labels = vec![-1.0, 1.0];
        let model = smo_train(&gram, &labels, 10.0, 1e-8).unwrap();
        assert!(model.converged);
        assert_eq!(model.support_indices, vec![0, 1]);
        let alphas = model.dense_alphas(2);
        assert!((alphas[0] - 0.5).abs() < 1e-7, "α1 = 1/2, got {}", alphas[0]);
        assert!((alphas[1] - 0.5).abs() < 1e-7, "α2 = 1/2, got {}", alphas[1]);
        let d = model.decision_values(&gram).unwrap();
        assert!((d[0] + 1.0).abs() < 1e-6, "f(-1) = -1, got {}", d[0]);
        assert!((d[1] - 1.0).abs() < 1e-6, "f(+1) = +1, got {}", d[1]);
        // Slope recovered from the duals: w = Σ α y x' = 1, so in original
        // coordinates f(x) = x' - 3 = x.
        let w: f64 = alphas[0] * -1.0 * shifted[0][0] + alphas[1] * 1.0 * shifted[1][0];
        assert!((w - 1.0).abs() < 1e-6);
        assert!((model.bias + 3.0).abs() < 1e-6, "b = -3, got {}", model.bias);
        assert!(labels.iter().zip(&d).all(|(y, v)| y * v > 0.0));
    }

    #[test]
    fn sum_alpha_y_stays_zero_and_kkt_holds() {
        let points: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0],
            vec![2.0, 1.5],
            vec![1.5, 1.0],
            vec![4.0, 4.5],
            vec![5.0, 4.0],
            vec![4.5, 5.5],
        ];
        let labels = vec![-1.0, -1.0, -1.0, 1.0, 1.0, 1.0];
        let gram = linear_gram(&points);
        let model = smo_train(&gram, &labels, 1.0, 1e-5).unwrap();
        assert!(model.converged);
        let sum: f64 = model.dual_coefs.iter().sum();
        assert!(sum.abs() < 1e-6, "Σ α_p y_p = {sum}");
        let worst = max_kkt_violation(&model, &gram, &labels);
        assert!(worst < 1e-5, "kkt violation {worst}");
        for (coef, &i) in model.dual_coefs.iter().zip(&model.support_indices) {
            assert!(coef.abs() <= model.c + 1e-9);
            assert!(i < points.len());
        }
    }

    #[test]
    fn duplicated_dataset_keeps_the_decision_function() {
        let points: Vec<Vec<f64>> = vec![
            vec![1.0, 1.0],
            vec![1.5, 2.0],
            vec![4.0, 4.0],
            vec![4.5, 3.5],
        ];
        let labels = vec![-1.0, -1.0, 1.0, 1.0];
        let gram = linear_gram(&points);
        let model = smo_train(&gram, &labels, 5.0, 1e-9).unwrap();

        let mut doubled = points.clone();
        doubled.extend(points.iter().cloned());
        let mut labels2 = labels.clone();
        labels2.extend(labels.iter().copied());
        let gram2 = linear_gram(&doubled);
        let model2 = smo_train(&gram2, &labels2, 5.0, 1e-9).unwrap();

        // Probe grid in input space; kernel rows against each training set.
        for px in [0.0f64, 1.0, 2.0, 3.0, 5.0] {
            for py in [0.0f64, 2.0, 4.0] {
                let row: Vec<f64> = points
                    .iter()
                    .map(|p| (p[0] * px + p[1] * py).max(0.0))
                    .collect();
                let row2: Vec<f64> = doubled
                    .iter()
                    .map(|p| (p[0] * px + p[1] * py).max(0.0))
                    .collect();
                let d1 = model.decision(&row);
                let d2 = model2.decision(&row2);
                assert!((d1 - d2).abs() < 1e-6, "probe ({px},{py}): {d1} vs {d2}");
            }
        }
    }

    #[test]
    fn label_flip_negates_the_decision() {
        let points: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0],
            vec![2.0, 1.0],
            vec![4.0, 5.0],
            vec![5.0, 4.0],
            vec![3.0, 3.2],
        ];
        let labels: Vec<f64> = vec![-1.0, -1.0, 1.0, 1.0, -1.0];
        let flipped: Vec<f64> = labels.iter().map(|y| -y).collect();
        let gram = linear_gram(&points);
        let a = smo_train(&gram, &labels, 2.0, 1e-7).unwrap();
        let b = smo_train(&gram, &flipped, 2.0, 1e-7).unwrap();
        let da = a.decision_values(&gram).unwrap();
        let db = b.decision_values(&gram).unwrap();
        for (x, y) in da.iter().zip(&db) {
            assert!((x + y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn all_zero_coefs_predict_the_bias_sign() {
        let model = SvmModel {
            dual_coefs: vec![],
            support_indices: vec![],
            bias: -0.7,
            c: 1.0,
            converged: true,
        };
        let cross = GramMatrix::new(Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap()).unwrap();
        let d = model.decision_values(&cross).unwrap();
        assert_eq!(d, vec![-0.7]);
    }

    #[test]
    fn single_class_input_is_rejected() {
        let gram = linear_gram(&[vec![1.0], vec![2.0]]);
        assert!(smo_train(&gram, &[1.0, 1.0], 1.0, 1e-3).is_err());
        assert!(smo_train(&gram, &[1.0, 0.5], 1.0, 1e-3).is_err());
    }

    #[test]
    fn one_vs_rest_classifies_three_blobs() {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (cx, cy, class) in [(1.0, 1.0, 0usize), (5.0, 1.0, 1), (3.0, 6.0, 2)] {
            for (dx, dy) in [(0.0, 0.0), (0.3, 0.1), (-0.2, 0.2), (0.1, -0.3)] {
                points.push(vec![cx + dx, cy + dy]);
                labels.push(class);
            }
        }
        let gram = linear_gram(&points);
        let model = svm_train_one_vs_rest(&gram, &labels, 10.0, 1e-5).unwrap();
        assert_eq!(model.classes, vec![0, 1, 2]);
        let pred = svm_predict(&model, &gram).unwrap();
        let correct = pred.iter().zip(&labels).filter(|(a, b)| a == b).count();
        assert_eq!(correct, labels.len(), "train accuracy on separated blobs");
    }
}
