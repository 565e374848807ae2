//! Minimal dense feed-forward network with exact backpropagation.
//!
//! Layers are affine maps `z = W a + b` followed by an elementwise
//! activation; the hidden activation and the output activation are chosen
//! independently. Forward passes record every pre-activation and
//! activation in a [`ForwardTrace`] so a later backward pass can produce
//! exact gradients of any scalar loss with respect to every weight, bias,
//! and the network input.
//!
//! Shape mismatches are reported as structured errors naming the offending
//! layer; nothing is silently truncated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{activate, Activation};
use crate::error::{DekError, Result};
use crate::matrix::Matrix;

/// One dense layer: weight matrix (out_dim × in_dim) plus bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layers: Vec<LayerParams>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Gradients with the same shape as the parameters they refer to.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

/// Everything recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// Pre-activation vector of each layer, in layer order.
    pub pre_activations: Vec<Vec<f64>>,
    /// Activation vector of each layer; the last one is the network output.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least one layer")
    }
}

impl MlpParams {
    /// Builds a network from explicit layers.
    pub fn new(
        layers: Vec<LayerParams>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(DekError::InvalidConfig("network needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.rows() != layer.biases.len() {
                return Err(DekError::DimensionMismatch {
                    context: format!("layer {i} bias length"),
                    expected: layer.weights.rows(),
                    actual: layer.biases.len(),
                });
            }
            if i > 0 && layers[i - 1].out_dim() != layer.in_dim() {
                return Err(DekError::DimensionMismatch {
                    context: format!("layer {i} input width"),
                    expected: layers[i - 1].out_dim(),
                    actual: layer.in_dim(),
                });
            }
        }
        Ok(MlpParams {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    /// Seeded initialization: weights uniform in ±sqrt(6/(fan_in+fan_out)),
    /// biases zero. `dims` lists input dim followed by each layer's width.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(DekError::InvalidConfig(
                "need an input dim and at least one layer width".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(DekError::InvalidConfig("layer widths must be positive".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut weights = Matrix::zeros(fan_out, fan_in);
            for v in weights.data_mut() {
                *v = rng.gen_range(-limit..limit);
            }
            layers.push(LayerParams {
                weights,
                biases: vec![0.0; fan_out],
            });
        }
        MlpParams::new(layers, hidden_activation, output_activation)
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable access to the layers, for gradient checking and experiments.
    /// The slice length is fixed; keep widths chained when editing.
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    fn activation_for(&self, layer_idx: usize) -> Activation {
        if layer_idx + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Full forward pass recording a trace for backpropagation.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != self.input_dim() {
            return Err(DekError::DimensionMismatch {
                context: "layer 0 input".into(),
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.matvec(&current)?;
            for (zv, b) in z.iter_mut().zip(&layer.biases) {
                *zv += b;
            }
            let a = activate(self.activation_for(i), &z)
                .map_err(|_| DekError::NonFinite(format!("layer {i} pre-activation")))?;
            pre_activations.push(z);
            current = a.clone();
            activations.push(a);
        }
        Ok(ForwardTrace {
            input: input.to_vec(),
            pre_activations,
            activations,
        })
    }

    /// Exact gradients of a scalar loss whose gradient with respect to the
    /// network output is `output_grad`. Returns parameter gradients and the
    /// gradient with respect to the network input.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let n = self.layers.len();
        if trace.activations.len() != n || trace.pre_activations.len() != n {
            return Err(DekError::DimensionMismatch {
                context: "trace layer count".into(),
                expected: n,
                actual: trace.activations.len(),
            });
        }
        if output_grad.len() != self.output_dim() {
            return Err(DekError::DimensionMismatch {
                context: "output gradient".into(),
                expected: self.output_dim(),
                actual: output_grad.len(),
            });
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if trace.pre_activations[i].len() != layer.out_dim() {
                return Err(DekError::DimensionMismatch {
                    context: format!("trace layer {i} width"),
                    expected: layer.out_dim(),
                    actual: trace.pre_activations[i].len(),
                });
            }
        }
        if trace.input.len() != self.input_dim() {
            return Err(DekError::DimensionMismatch {
                context: "trace input".into(),
                expected: self.input_dim(),
                actual: trace.input.len(),
            });
        }

        let mut grads: Vec<LayerGrads> = Vec::with_capacity(n);
        // delta = dL/dz for the layer being processed, starting at the top.
        let mut delta: Vec<f64> = output_grad
            .iter()
            .zip(&trace.pre_activations[n - 1])
            .zip(&trace.activations[n - 1])
            .map(|((&g, &z), &a)| g * self.activation_for(n - 1).derivative(z, a))
            .collect();

        for i in (0..n).rev() {
            let layer_input: &[f64] = if i == 0 {
                &trace.input
            } else {
                &trace.activations[i - 1]
            };
            let mut wg = Matrix::zeros(self.layers[i].out_dim(), self.layers[i].in_dim());
            for (r, &d) in delta.iter().enumerate() {
                let row = wg.row_mut(r);
                for (c, &x) in layer_input.iter().enumerate() {
                    row[c] = d * x;
                }
            }
            grads.push(LayerGrads {
                weights: wg,
                biases: delta.clone(),
            });
            // dL/d(layer input)
            let upstream = self.layers[i].weights.transpose_matvec(&delta)?;
            if i == 0 {
                grads.reverse();
                return Ok((MlpGrads { layers: grads }, upstream));
            }
            delta = upstream
                .iter()
                .zip(&trace.pre_activations[i - 1])
                .zip(&trace.activations[i - 1])
                .map(|((&g, &z), &a)| g * self.activation_for(i - 1).derivative(z, a))
                .collect();
        }
        unreachable!("loop returns at i == 0")
    }

    /// Plain gradient-descent step: p ← p − learning_rate · grad(p).
    ///
    /// Rejects non-finite gradients before touching any parameter and
    /// verifies every parameter is still finite afterwards.
    pub fn apply_gradients(&mut self, grads: &MlpGrads, learning_rate: f64) -> Result<()> {
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(DekError::InvalidConfig(format!(
                "learning rate must be finite and >= 0, got {learning_rate}"
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(DekError::DimensionMismatch {
                context: "gradient layer count".into(),
                expected: self.layers.len(),
                actual: grads.layers.len(),
            });
        }
        for (i, (layer, g)) in self.layers.iter().zip(&grads.layers).enumerate() {
            if layer.weights.rows() != g.weights.rows()
                || layer.weights.cols() != g.weights.cols()
                || layer.biases.len() != g.biases.len()
            {
                return Err(DekError::DimensionMismatch {
                    context: format!("gradient shape for layer {i}"),
                    expected: layer.weights.rows() * layer.weights.cols(),
                    actual: g.weights.rows() * g.weights.cols(),
                });
            }
            if !g.weights.is_finite() || !g.biases.iter().all(|v| v.is_finite()) {
                return Err(DekError::NonFinite(format!("gradient for layer {i}")));
            }
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, gv) in layer.weights.data_mut().iter_mut().zip(g.weights.data()) {
                *p -= learning_rate * gv;
            }
            for (p, gv) in layer.biases.iter_mut().zip(&g.biases) {
                *p -= learning_rate * gv;
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if !layer.weights.is_finite() || !layer.biases.iter().all(|v| v.is_finite()) {
                return Err(DekError::NonFinite(format!("layer {i} parameters after update")));
            }
        }
        Ok(())
    }
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        MlpGrads {
            layers: params
                .layers()
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    biases: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// Accumulates `other` into `self` (shapes must match).
    pub fn add_assign(&mut self, other: &MlpGrads) {
        debug_assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for v in l.weights.data_mut() {
                *v *= factor;
            }
            for v in &mut l.biases {
                *v *= factor;
            }
        }
    }
}
