//! A trainable-kernel toolkit: a paired deep network that learns a
//! symmetric similarity function from labeled data, plus the kernel
//! machines that consume it (kernel KNN, ranking evaluation, kernel PCA,
//! an SMO-trained SVM) and an RBF baseline.
//!
//! The learned kernel feeds two shared-weight embedding branches into a
//! dimension-wise symmetric combine layer and a small head network; the
//! whole stack trains by plain gradient descent on pairwise targets
//! (same-class indicators for classification, `exp(-γ|Δy|)` for
//! regression). See the `model` and `train` modules for the architecture
//! and the training loop, and `knn` / `ranking` / `kpca` / `svm` / `rbf`
//! for the consumers.

pub mod activation;
pub mod dataset;
pub mod error;
pub mod export;
pub mod gram;
pub mod kpca;
pub mod knn;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod pairing;
pub mod pipeline;
pub mod ranking;
pub mod rbf;
pub mod report;
pub mod svm;
pub mod train;

pub use activation::{activate, Activation};
pub use error::{DekError, Result};
pub use gram::GramMatrix;
pub use matrix::Matrix;
pub use mlp::{ForwardTrace, LayerParams, MlpGrads, MlpParams};
pub use model::{combine, combine_backward, DekArchitecture, DekGrads, DekModel, PairTrace, Task};
