//! Evaluation metrics.

use crate::error::{DekError, Result};

/// Fraction of equal predictions.
pub fn metric_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Coefficient of determination R² = 1 − SS_res/SS_tot. Constant truth has
/// no defined R² and is rejected.
pub fn metric_r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred.len(), truth.len())?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(DekError::InvalidInput(
            "R² is undefined for a constant truth vector".into(),
        ));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn check(pred: usize, truth: usize) -> Result<()> {
    if truth == 0 {
        return Err(DekError::Empty("metric over an empty list".into()));
    }
    if pred != truth {
        return Err(DekError::DimensionMismatch {
            context: "metric prediction list".into(),
            expected: truth,
            actual: pred,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_predictions_score_one() {
        assert_eq!(metric_accuracy(&[1, 0, 2], &[1, 0, 2]).unwrap(), 1.0);
        assert_eq!(metric_r2(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn mean_prediction_scores_zero_r2() {
        let truth = [1.0, 2.0, 3.0];
        let r2 = metric_r2(&[2.0, 2.0, 2.0], &truth).unwrap();
        assert!(r2.abs() < 1e-15);
    }

    #[test]
    fn hand_arithmetic_r2() {
        let r2 = metric_r2(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_truth_is_rejected() {
        assert!(metric_r2(&[1.0, 2.0], &[5.0, 5.0]).is_err());
    }

    #[test]
    fn misaligned_or_empty_lists_are_rejected() {
        assert!(metric_accuracy(&[1], &[1, 2]).is_err());
        assert!(metric_accuracy(&[], &[]).is_err());
    }
}
