//! The deep embedding kernel: two shared-weight embedding branches, a
//! dimension-wise symmetric combine layer, and a kernel head that maps the
//! combined pair representation to a scalar similarity.
//!
//! Architecture rule: with input dimension `d` and width factor `α`, every
//! embedding layer has `k = α·d` units and every kernel hidden layer has
//! `2k` units; the head ends in a single output unit whose activation is
//! sigmoid for classification (similarities in (0,1)) and ReLU for
//! regression (similarities in [0,∞)).

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DekError, Result};
use crate::gram::GramMatrix;
use crate::matrix::Matrix;
use crate::mlp::{ForwardTrace, MlpGrads, MlpParams};
use crate::activation::Activation;

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Classification => f.write_str("classification"),
            Task::Regression => f.write_str("regression"),
        }
    }
}

/// Architecture hyperparameters for [`DekModel::new`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DekArchitecture {
    pub input_dim: usize,
    /// The width factor α: embedding layers get α·d units, kernel layers 2·α·d.
    pub width_factor: usize,
    /// Number of embedding layers (k1).
    pub embedding_layers: usize,
    /// Number of kernel hidden layers (k2), before the 1-unit output layer.
    pub kernel_layers: usize,
    /// Hidden activation σ for both component networks; also the embedding
    /// output activation.
    pub activation: Activation,
    pub task: Task,
}

impl DekArchitecture {
    pub fn new(input_dim: usize, task: Task) -> Self {
        DekArchitecture {
            input_dim,
            width_factor: 2,
            embedding_layers: 2,
            kernel_layers: 2,
            activation: Activation::Relu,
            task,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(DekError::InvalidConfig("input_dim must be positive".into()));
        }
        if self.width_factor == 0 {
            return Err(DekError::InvalidConfig("width_factor must be positive".into()));
        }
        if self.embedding_layers == 0 || self.kernel_layers == 0 {
            return Err(DekError::InvalidConfig(
                "embedding_layers and kernel_layers must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DekModel {
    embedding: MlpParams,
    kernel: MlpParams,
    width_factor: usize,
    input_dim: usize,
    task: Task,
}

/// Forward-pass record for one sample pair, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct PairTrace {
    pub left: ForwardTrace,
    pub right: ForwardTrace,
    pub head: ForwardTrace,
}

/// Gradients for the kernel head and the shared embedding network.
#[derive(Debug, Clone)]
pub struct DekGrads {
    pub embedding: MlpGrads,
    pub kernel: MlpGrads,
}

impl DekGrads {
    pub fn zeros_like(model: &DekModel) -> Self {
        DekGrads {
            embedding: MlpGrads::zeros_like(&model.embedding),
            kernel: MlpGrads::zeros_like(&model.kernel),
        }
    }

    pub fn add_assign(&mut self, other: &DekGrads) {
        self.embedding.add_assign(&other.embedding);
        self.kernel.add_assign(&other.kernel);
    }

    pub fn scale(&mut self, factor: f64) {
        self.embedding.scale(factor);
        self.kernel.scale(factor);
    }
}

/// Dimension-wise symmetric pair representation: the first half holds
/// elementwise products, the second half absolute differences. Swapping the
/// arguments yields the identical vector, which is what makes the learned
/// similarity a kernel.
pub fn combine(o_i: &[f64], o_j: &[f64]) -> Result<Vec<f64>> {
    if o_i.len() != o_j.len() {
        return Err(DekError::DimensionMismatch {
            context: "combine".into(),
            expected: o_i.len(),
            actual: o_j.len(),
        });
    }
    let d = o_i.len();
    let mut u = Vec::with_capacity(2 * d);
    for m in 0..d {
        u.push(o_i[m] * o_j[m]);
    }
    for m in 0..d {
        u.push((o_i[m] - o_j[m]).abs());
    }
    Ok(u)
}

/// Chain rule through [`combine`]. The absolute difference uses subgradient
/// 0 at equality, which self-pairs hit on every dimension.
pub fn combine_backward(
    o_i: &[f64],
    o_j: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = o_i.len();
    if o_j.len() != d {
        return Err(DekError::DimensionMismatch {
            context: "combine_backward inputs".into(),
            expected: d,
            actual: o_j.len(),
        });
    }
    if upstream.len() != 2 * d {
        return Err(DekError::DimensionMismatch {
            context: "combine_backward upstream".into(),
            expected: 2 * d,
            actual: upstream.len(),
        });
    }
    let mut gi = vec![0.0; d];
    let mut gj = vec![0.0; d];
    for m in 0..d {
        gi[m] = upstream[m] * o_j[m];
        gj[m] = upstream[m] * o_i[m];
        let diff = o_i[m] - o_j[m];
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        gi[m] += upstream[d + m] * sign;
        gj[m] -= upstream[d + m] * sign;
    }
    Ok((gi, gj))
}

impl DekModel {
    /// Builds a freshly initialized model from a seeded generator.
    pub fn new(arch: DekArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let d = arch.input_dim;
        let k = arch.width_factor * d;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut embed_dims = vec![d];
        embed_dims.extend(std::iter::repeat(k).take(arch.embedding_layers));
        // The embedding output layer uses σ as well: one activation policy
        // across the embedding depth.
        let embedding =
            MlpParams::init(&embed_dims, arch.activation, arch.activation, &mut rng)?;

        let mut kernel_dims = vec![2 * k];
        kernel_dims.extend(std::iter::repeat(2 * k).take(arch.kernel_layers));
        kernel_dims.push(1);
        let head_activation = match arch.task {
            Task::Classification => Activation::Sigmoid,
            Task::Regression => Activation::Relu,
        };
        let mut kernel = MlpParams::init(&kernel_dims, arch.activation, head_activation, &mut rng)?;
        if arch.task == Task::Regression {
            // The ReLU head must start in its active region: with random
            // head weights the pre-activation is a near-constant draw
            // across pairs and lands negative for many seeds, freezing
            // training at K ≡ 0. Zeroed head weights with bias 0.5 give
            // every pair K = 0.5 at initialization; the hidden layers below
            // stay randomly initialized, so the head weights differentiate
            // on the first update.
            let last = kernel.layers_mut().last_mut().expect("non-empty");
            last.weights.data_mut().fill(0.0);
            last.biases[0] = 0.5;
        }

        Ok(DekModel {
            embedding,
            kernel,
            width_factor: arch.width_factor,
            input_dim: d,
            task: arch.task,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width_factor(&self) -> usize {
        self.width_factor
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn embedding(&self) -> &MlpParams {
        &self.embedding
    }

    pub fn kernel(&self) -> &MlpParams {
        &self.kernel
    }

    /// Mutable component access, for gradient checking and experiments.
    pub fn embedding_mut(&mut self) -> &mut MlpParams {
        &mut self.embedding
    }

    pub fn kernel_mut(&mut self) -> &mut MlpParams {
        &mut self.kernel
    }

    pub fn embedding_width(&self) -> usize {
        self.embedding.output_dim()
    }

    /// Similarity of one pair plus the trace needed for backpropagation.
    pub fn forward(&self, x_i: &[f64], x_j: &[f64]) -> Result<(f64, PairTrace)> {
        if x_i.len() != self.input_dim || x_j.len() != self.input_dim {
            return Err(DekError::DimensionMismatch {
                context: "pair input".into(),
                expected: self.input_dim,
                actual: if x_i.len() != self.input_dim {
                    x_i.len()
                } else {
                    x_j.len()
                },
            });
        }
        let left = self.embedding.forward(x_i)?;
        let right = self.embedding.forward(x_j)?;
        let u = combine(left.output(), right.output())?;
        let head = self.kernel.forward(&u)?;
        let similarity = head.output()[0];
        Ok((similarity, PairTrace { left, right, head }))
    }

    /// Similarity only, when no gradients are needed.
    pub fn similarity(&self, x_i: &[f64], x_j: &[f64]) -> Result<f64> {
        self.forward(x_i, x_j).map(|(s, _)| s)
    }

    /// Gradients of a scalar loss with `dL/dK = dl_dk` at this pair's
    /// similarity. The two branches share weights, so both contributions to
    /// the embedding parameters are summed.
    pub fn backward(&self, trace: &PairTrace, dl_dk: f64) -> Result<DekGrads> {
        let (kernel_grads, du) = self.kernel.backward(&trace.head, &[dl_dk])?;
        let (g_left, g_right) =
            combine_backward(trace.left.output(), trace.right.output(), &du)?;
        let (mut embedding_grads, _) = self.embedding.backward(&trace.left, &g_left)?;
        let (right_grads, _) = self.embedding.backward(&trace.right, &g_right)?;
        embedding_grads.add_assign(&right_grads);
        Ok(DekGrads {
            embedding: embedding_grads,
            kernel: kernel_grads,
        })
    }

    pub fn apply_gradients(&mut self, grads: &DekGrads, learning_rate: f64) -> Result<()> {
        self.embedding.apply_gradients(&grads.embedding, learning_rate)?;
        self.kernel.apply_gradients(&grads.kernel, learning_rate)
    }

    /// Kernel evaluations between two sample sets: entry (p,q) is
    /// K(X_a[p], X_b[q]). Rows are computed in parallel with deterministic
    /// placement. An empty set yields an empty matrix.
    pub fn gram(&self, x_a: &Matrix, x_b: &Matrix) -> Result<GramMatrix> {
        self.check_set(x_a)?;
        self.check_set(x_b)?;
        if x_a.rows() == 0 || x_b.rows() == 0 {
            return GramMatrix::new(Matrix::zeros(x_a.rows(), x_b.rows()));
        }
        let mut values = Matrix::zeros(x_a.rows(), x_b.rows());
        let cols = x_b.rows();
        let rows: Vec<Vec<f64>> = (0..x_a.rows())
            .into_par_iter()
            .map(|p| {
                let mut row = vec![0.0; cols];
                for (q, slot) in row.iter_mut().enumerate() {
                    *slot = self
                        .similarity(x_a.row(p), x_b.row(q))
                        .expect("dims pre-checked");
                }
                row
            })
            .collect();
        for (p, row) in rows.into_iter().enumerate() {
            values.row_mut(p).copy_from_slice(&row);
        }
        GramMatrix::new(values)
    }

    /// Kernel evaluations of one set against itself. Only the upper triangle
    /// is evaluated; symmetry of the combine operator makes the mirrored
    /// entries bit-exact.
    pub fn gram_self(&self, x: &Matrix) -> Result<GramMatrix> {
        self.check_set(x)?;
        let n = x.rows();
        if n == 0 {
            return GramMatrix::new_symmetric(Matrix::zeros(0, 0));
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|p| {
                let mut row = vec![0.0; n - p];
                for (offset, slot) in row.iter_mut().enumerate() {
                    *slot = self
                        .similarity(x.row(p), x.row(p + offset))
                        .expect("dims pre-checked");
                }
                row
            })
            .collect();
        let mut values = Matrix::zeros(n, n);
        for (p, row) in rows.into_iter().enumerate() {
            for (offset, v) in row.into_iter().enumerate() {
                values.set(p, p + offset, v);
                values.set(p + offset, p, v);
            }
        }
        GramMatrix::new_symmetric(values)
    }

    fn check_set(&self, x: &Matrix) -> Result<()> {
        if x.rows() > 0 && x.cols() != self.input_dim {
            return Err(DekError::DimensionMismatch {
                context: "sample set width".into(),
                expected: self.input_dim,
                actual: x.cols(),
            });
        }
        Ok(())
    }

    /// Writes the model as versioned JSON. All f64 values round-trip exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| DekError::io(path, e))?;
        let mut w = BufWriter::new(file);
        let envelope = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(&mut w, &envelope).map_err(|e| DekError::ModelFormat {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        w.flush().map_err(|e| DekError::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| DekError::io(path, e))?;
        let envelope: ModelFile =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| DekError::ModelFormat {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        if envelope.format_version != MODEL_FORMAT_VERSION {
            return Err(DekError::ModelFormat {
                path: path.display().to_string(),
                reason: format!(
                    "unsupported format version {} (expected {})",
                    envelope.format_version, MODEL_FORMAT_VERSION
                ),
            });
        }
        Ok(envelope.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: DekModel,
}
