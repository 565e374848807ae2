//! The training loop: pair generation, mini-batch gradient descent with
//! batch-averaged gradients, and periodic local re-pairing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{DekError, Result};
use crate::loss::{
    classification_loss_grad, classification_pair_loss, regression_loss_grad,
    regression_pair_loss,
};
use crate::model::{DekGrads, DekModel, Task};
use crate::pairing::{
    cap_pairs_per_reference, make_pairs_full, make_pairs_local, make_pairs_regression, PairBatch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    Full,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub pairing: Pairing,
    /// Iterations (mini-batch steps) between local re-pairings; the first
    /// pairing happens at iteration 1. Only consulted when pairing is local.
    pub pairing_interval: usize,
    /// Recall level for the local neighborhood cutoff, in (0, 1].
    pub recall_level: f64,
    /// Scale of the regression pair target exp(-γ|Δy|).
    pub gamma: f64,
    pub seed: u64,
    /// Optional cap on pairs per reference sample.
    pub max_pairs_per_ref: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 128,
            pairing: Pairing::Full,
            pairing_interval: 50,
            recall_level: 0.1,
            gamma: 1.0,
            seed: 0,
            max_pairs_per_ref: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(DekError::InvalidConfig(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(DekError::InvalidConfig("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(DekError::InvalidConfig("batch_size must be positive".into()));
        }
        if self.pairing_interval == 0 {
            return Err(DekError::InvalidConfig("pairing_interval must be positive".into()));
        }
        if !(self.recall_level > 0.0 && self.recall_level <= 1.0) {
            return Err(DekError::InvalidConfig(format!(
                "recall_level must lie in (0, 1], got {}",
                self.recall_level
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(DekError::InvalidConfig(format!(
                "gamma must be a positive real, got {}",
                self.gamma
            )));
        }
        if self.max_pairs_per_ref == Some(0) {
            return Err(DekError::InvalidConfig("max_pairs_per_ref must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// Training hit a non-finite loss or gradient; the run carries the last
    /// finite model.
    Diverged { iteration: usize, reason: String },
}

#[derive(Debug)]
pub struct TrainRun {
    pub model: DekModel,
    /// Mean loss per epoch, weighted by batch size.
    pub history: Vec<f64>,
    pub status: TrainStatus,
}

/// Pairs in a batch are processed in fixed-size chunks so the gradient
/// summation tree never depends on thread scheduling.
const GRAD_CHUNK: usize = 32;

/// Trains the model on the dataset. All randomness (shuffles, pair caps)
/// derives from `config.seed`, so identical inputs give identical runs.
/// `progress` receives (epoch, mean loss) after each epoch.
pub fn train(
    model: DekModel,
    data: &Dataset,
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainRun> {
    config.validate()?;
    if data.task() != model.task() {
        return Err(DekError::InvalidConfig(format!(
            "model task {} does not match dataset task {}",
            model.task(),
            data.task()
        )));
    }
    if data.dim() != model.input_dim() {
        return Err(DekError::DimensionMismatch {
            context: "training features".into(),
            expected: model.input_dim(),
            actual: data.dim(),
        });
    }
    if model.task() == Task::Regression && config.pairing == Pairing::Local {
        return Err(DekError::InvalidConfig(
            "local pairing requires class labels; use full pairing for regression".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = model;
    let mut history = Vec::with_capacity(config.epochs);

    let generate = |model: &DekModel, rng: &mut ChaCha8Rng| -> Result<PairBatch> {
        let batch = match (model.task(), config.pairing) {
            (Task::Classification, Pairing::Full) => make_pairs_full(data.labels()?)?,
            (Task::Classification, Pairing::Local) => {
                make_pairs_local(model, &data.features, data.labels()?, config.recall_level)?
            }
            (Task::Regression, _) => make_pairs_regression(data.values()?, config.gamma)?,
        };
        match config.max_pairs_per_ref {
            Some(cap) => cap_pairs_per_reference(&batch, cap, rng),
            None => Ok(batch),
        }
    };

    // Iteration 1 pairing: generated eagerly so epoch schedules have a size.
    let mut pairs = generate(&model, &mut rng)?;
    let mut iteration = 0usize;

    for epoch in 1..=config.epochs {
        let steps = pairs.len().div_ceil(config.batch_size);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng);
        let mut cursor = 0usize;
        let mut loss_sum = 0.0;
        let mut pair_count = 0usize;

        for _ in 0..steps {
            iteration += 1;
            if config.pairing == Pairing::Local
                && iteration > 1
                && (iteration - 1) % config.pairing_interval == 0
            {
                pairs = generate(&model, &mut rng)?;
                order = (0..pairs.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let end = (cursor + config.batch_size).min(order.len());
            let batch_idx = &order[cursor..end];
            cursor = end;

            let (batch_loss, mut grads) = batch_forward_backward(&model, data, &pairs, batch_idx)?;
            if !batch_loss.is_finite() {
                return Ok(TrainRun {
                    model,
                    history,
                    status: TrainStatus::Diverged {
                        iteration,
                        reason: format!("batch loss is {batch_loss}"),
                    },
                });
            }
            grads.scale(1.0 / batch_idx.len() as f64);
            let backup = model.clone();
            if let Err(e) = model.apply_gradients(&grads, config.learning_rate) {
                return Ok(TrainRun {
                    model: backup,
                    history,
                    status: TrainStatus::Diverged {
                        iteration,
                        reason: e.to_string(),
                    },
                });
            }
            loss_sum += batch_loss * batch_idx.len() as f64;
            pair_count += batch_idx.len();
        }

        let mean = loss_sum / pair_count.max(1) as f64;
        history.push(mean);
        progress(epoch, mean);
    }

    Ok(TrainRun {
        model,
        history,
        status: TrainStatus::Completed,
    })
}

/// Forward/backward over one mini-batch. Per-pair work runs in parallel;
/// chunk results are reduced in a fixed order for determinism.
fn batch_forward_backward(
    model: &DekModel,
    data: &Dataset,
    pairs: &PairBatch,
    batch_idx: &[usize],
) -> Result<(f64, DekGrads)> {
    let task = model.task();
    let chunk_results: Vec<Result<(f64, DekGrads)>> = batch_idx
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = DekGrads::zeros_like(model);
            let mut loss = 0.0;
            for &idx in chunk {
                let (i, j) = pairs.pairs()[idx];
                let target = pairs.targets()[idx];
                let (sim, trace) = model.forward(data.features.row(i), data.features.row(j))?;
                let (pair_loss, dl_dk) = match task {
                    Task::Classification => (
                        classification_pair_loss(sim, target),
                        classification_loss_grad(sim, target),
                    ),
                    Task::Regression => (
                        regression_pair_loss(sim, target),
                        regression_loss_grad(sim, target),
                    ),
                };
                loss += pair_loss;
                let pair_grads = model.backward(&trace, dl_dk)?;
                grads.add_assign(&pair_grads);
            }
            Ok((loss, grads))
        })
        .collect();

    let mut total = DekGrads::zeros_like(model);
    let mut loss_sum = 0.0;
    for r in chunk_results {
        let (l, g) = r?;
        loss_sum += l;
        total.add_assign(&g);
    }
    Ok((loss_sum / batch_idx.len() as f64, total))
}
