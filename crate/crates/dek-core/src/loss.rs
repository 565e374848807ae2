//! Pairwise training objectives.
//!
//! Classification minimizes mean binary cross-entropy between pair
//! similarities and same-class indicators; regression minimizes the mean
//! squared gap between similarities and `exp(-γ|Δy|)` targets.

use crate::error::{DekError, Result};

/// Keeps log arguments away from 0 under saturated sigmoid outputs.
pub const CLAMP_EPSILON: f64 = 1e-12;

#[inline]
fn clamp_unit(k: f64) -> f64 {
    k.clamp(CLAMP_EPSILON, 1.0 - CLAMP_EPSILON)
}

/// Single-pair cross-entropy term −[Y·ln K + (1−Y)·ln(1−K)], with K clamped
/// into [ε, 1−ε] so saturated outputs stay finite.
pub fn classification_pair_loss(similarity: f64, target: f64) -> f64 {
    let k = clamp_unit(similarity);
    -(target * k.ln() + (1.0 - target) * (1.0 - k).ln())
}

/// Mean over pairs of [`classification_pair_loss`].
pub fn classification_loss(similarities: &[f64], targets: &[f64]) -> Result<f64> {
    check_aligned(similarities, targets)?;
    let total: f64 = similarities
        .iter()
        .zip(targets)
        .map(|(&k, &y)| classification_pair_loss(k, y))
        .sum();
    Ok(total / similarities.len() as f64)
}

/// d/dK of the single-pair cross-entropy term (before the 1/N mean):
/// (K − Y) / (K(1−K)), evaluated at the clamped K.
pub fn classification_loss_grad(similarity: f64, target: f64) -> f64 {
    let k = clamp_unit(similarity);
    (k - target) / (k * (1.0 - k))
}

/// Pair target for regression: exp(−γ·|y_i − y_j|), in (0, 1], equal to 1
/// exactly when the targets coincide, symmetric in its arguments.
pub fn regression_target(y_i: f64, y_j: f64, gamma: f64) -> Result<f64> {
    if !y_i.is_finite() || !y_j.is_finite() {
        return Err(DekError::NonFinite("regression target inputs".into()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(DekError::InvalidConfig(format!(
            "gamma must be a positive real, got {gamma}"
        )));
    }
    Ok((-gamma * (y_i - y_j).abs()).exp())
}

/// Single-pair squared difference (K − K')².
pub fn regression_pair_loss(similarity: f64, target: f64) -> f64 {
    (similarity - target) * (similarity - target)
}

/// Mean squared difference between similarities and pair targets.
pub fn regression_loss(similarities: &[f64], targets: &[f64]) -> Result<f64> {
    check_aligned(similarities, targets)?;
    let total: f64 = similarities
        .iter()
        .zip(targets)
        .map(|(&k, &t)| regression_pair_loss(k, t))
        .sum();
    Ok(total / similarities.len() as f64)
}

/// d/dK of the single-pair squared term (before the 1/N mean): 2(K − K').
pub fn regression_loss_grad(similarity: f64, target: f64) -> f64 {
    2.0 * (similarity - target)
}

fn check_aligned(similarities: &[f64], targets: &[f64]) -> Result<()> {
    if similarities.is_empty() {
        return Err(DekError::Empty("loss over an empty batch".into()));
    }
    if similarities.len() != targets.len() {
        return Err(DekError::DimensionMismatch {
            context: "loss targets".into(),
            expected: similarities.len(),
            actual: targets.len(),
        });
    }
    Ok(())
}
