//! Elementwise activation functions and their derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{DekError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply_scalar(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z` whose activation value is `a`.
    ///
    /// ReLU uses the subgradient 0 at z = 0.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        };
        f.write_str(name)
    }
}

/// Applies `kind` elementwise. Rejects non-finite input.
pub fn activate(kind: Activation, z: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
        return Err(DekError::NonFinite(format!(
            "activation input contains {bad}"
        )));
    }
    Ok(z.iter().map(|&v| kind.apply_scalar(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(
            activate(Activation::Relu, &[-1.0, 0.0, 2.0]).unwrap(),
            vec![0.0, 0.0, 2.0]
        );
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(activate(Activation::Sigmoid, &[0.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn identity_passes_through() {
        assert_eq!(
            activate(Activation::Identity, &[3.25, -7.0]).unwrap(),
            vec![3.25, -7.0]
        );
    }

    #[test]
    fn non_finite_input_rejected() {
        assert!(activate(Activation::Relu, &[f64::NAN]).is_err());
        assert!(activate(Activation::Tanh, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for kind in [
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Identity,
        ] {
            for &z in &[-1.7, -0.3, 0.4, 2.1] {
                let a = kind.apply_scalar(z);
                let fd = (kind.apply_scalar(z + h) - kind.apply_scalar(z - h)) / (2.0 * h);
                assert!(
                    (kind.derivative(z, a) - fd).abs() < 1e-6,
                    "{kind} at {z}: analytic {} vs fd {fd}",
                    kind.derivative(z, a)
                );
            }
        }
    }
}
