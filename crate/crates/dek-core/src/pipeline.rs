//! Experiment orchestration: the resolved run configuration and the
//! end-to-end flows behind the CLI subcommands (train, eval, gram, kpca,
//! pairs, baseline-rbf).
//!
//! Every flow is deterministic in (config, seed, data): splits,
//! standardization, training and consumers all derive their randomness from
//! `RunConfig::seed`. Test data never influences standardization
//! statistics, pairing, or grid search.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::dataset::{load_csv, split, standardize, ColumnSpec, CsvSchema, Dataset};
use crate::error::{DekError, Result};
use crate::export;
use crate::gram::GramMatrix;
use crate::knn::{knn_classify, knn_regress, KnnWeighting};
use crate::kpca::{kpca_fit, kpca_project};
use crate::matrix::Matrix;
use crate::metrics::{metric_accuracy, metric_r2};
use crate::model::{DekArchitecture, DekModel, Task};
use crate::pairing::{make_pairs_full, make_pairs_local, make_pairs_regression};
use crate::ranking::rank_and_pr_curve;
use crate::rbf::{rbf_grid_search, rbf_kernel, rbf_kernel_self};
use crate::report::{config_hash, ExperimentReport};
use crate::svm::{svm_predict, svm_train_one_vs_rest};
use crate::train::{train, Pairing, TrainConfig, TrainStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureSection {
    pub width_factor: usize,
    pub embedding_layers: usize,
    pub kernel_layers: usize,
    /// Hidden activation σ of both component networks.
    pub activation: Activation,
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        ArchitectureSection {
            width_factor: 2,
            embedding_layers: 2,
            kernel_layers: 2,
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub pairing: Pairing,
    pub pairing_interval: usize,
    pub recall_level: f64,
    pub gamma: f64,
    pub max_pairs_per_ref: Option<usize>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainingSection {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            pairing: d.pairing,
            pairing_interval: d.pairing_interval,
            recall_level: d.recall_level,
            gamma: d.gamma,
            max_pairs_per_ref: d.max_pairs_per_ref,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsumerKind {
    Knn,
    Svm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsumerSection {
    pub kind: ConsumerKind,
    pub k: usize,
    /// Similarity-weighted KNN regression instead of the unweighted mean.
    pub weighted_knn: bool,
    pub svm_c: f64,
    pub svm_tol: f64,
}

impl Default for ConsumerSection {
    fn default() -> Self {
        ConsumerSection {
            kind: ConsumerKind::Knn,
            k: 5,
            weighted_knn: false,
            svm_c: 1.0,
            svm_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfSection {
    pub gammas: Vec<f64>,
    pub cs: Vec<f64>,
    pub folds: usize,
}

impl Default for RbfSection {
    fn default() -> Self {
        RbfSection {
            gammas: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            cs: vec![0.1, 1.0, 10.0, 100.0],
            folds: 3,
        }
    }
}

/// The fully resolved run configuration. Every key has a default, so a
/// minimal config file is three lines: data, target_col, task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: String,
    /// Column name when the file has a header, otherwise a column index.
    pub target_col: String,
    pub task: Task,
    pub split: f64,
    pub seed: u64,
    pub standardize: bool,
    pub has_header: bool,
    pub delimiter: String,
    pub out_dir: String,
    /// Model file consumed by eval/gram/kpca/pairs; defaults to the one
    /// train writes under out_dir.
    pub model: Option<String>,
    pub kpca_components: usize,
    pub architecture: ArchitectureSection,
    pub training: TrainingSection,
    pub consumer: ConsumerSection,
    pub rbf: RbfSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: String::new(),
            target_col: String::new(),
            task: Task::Classification,
            split: 0.5,
            seed: 0,
            standardize: true,
            has_header: true,
            delimiter: ",".into(),
            out_dir: "out".into(),
            model: None,
            kpca_components: 3,
            architecture: ArchitectureSection::default(),
            training: TrainingSection::default(),
            consumer: ConsumerSection::default(),
            rbf: RbfSection::default(),
        }
    }
}

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.training.learning_rate,
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            pairing: self.training.pairing,
            pairing_interval: self.training.pairing_interval,
            recall_level: self.training.recall_level,
            gamma: self.training.gamma,
            seed: self.seed,
            max_pairs_per_ref: self.training.max_pairs_per_ref,
        }
    }

    pub fn model_path(&self) -> PathBuf {
        match &self.model {
            Some(p) => PathBuf::from(p),
            None => Path::new(&self.out_dir).join("model.json"),
        }
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        Path::new(&self.out_dir).join(name)
    }

    fn schema(&self) -> Result<CsvSchema> {
        let target = if self.has_header {
            ColumnSpec::Name(self.target_col.clone())
        } else {
            ColumnSpec::Index(self.target_col.parse().map_err(|_| {
                DekError::InvalidConfig(format!(
                    "target_col must be a column index without a header, got '{}'",
                    self.target_col
                ))
            })?)
        };
        let delimiter = self.delimiter.as_bytes();
        if delimiter.len() != 1 {
            return Err(DekError::InvalidConfig(format!(
                "delimiter must be a single byte, got '{}'",
                self.delimiter
            )));
        }
        Ok(CsvSchema {
            target,
            task: self.task,
            delimiter: delimiter[0],
            has_header: self.has_header,
        })
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }
}

/// Loaded, split, standardized data with provenance notes.
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    if config.data.is_empty() {
        return Err(DekError::InvalidConfig("config needs a data path".into()));
    }
    if config.target_col.is_empty() {
        return Err(DekError::InvalidConfig("config needs a target_col".into()));
    }
    let loaded = load_csv(Path::new(&config.data), &config.schema()?)?;
    let mut warnings = Vec::new();
    if loaded.rejected_rows > 0 {
        warnings.push(format!("{} rows rejected during load", loaded.rejected_rows));
    }
    let split_out = split(&loaded.dataset, config.split, config.seed)?;
    warnings.extend(split_out.warnings);
    let (mut train_ds, mut test_ds) = (split_out.train, split_out.test);
    if config.standardize {
        let std_out = standardize(&mut train_ds, &mut test_ds)?;
        if !std_out.constant_columns.is_empty() {
            warnings.push(format!(
                "{} constant feature(s) left unscaled",
                std_out.constant_columns.len()
            ));
        }
    }
    Ok(Prepared {
        train: train_ds,
        test: test_ds,
        warnings,
    })
}

fn ensure_out_dir(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| DekError::io(Path::new(&config.out_dir), e))
}

/// train: fit a fresh model, write model file + loss history + report.
pub fn run_train(
    config: &RunConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<ExperimentReport> {
    ensure_out_dir(config)?;
    let prepared = prepare(config)?;
    let arch = DekArchitecture {
        input_dim: prepared.train.dim(),
        width_factor: config.architecture.width_factor,
        embedding_layers: config.architecture.embedding_layers,
        kernel_layers: config.architecture.kernel_layers,
        activation: config.architecture.activation,
        task: config.task,
    };
    let model = DekModel::new(arch, config.seed)?;
    let run = train(model, &prepared.train, &config.train_config(), &mut progress)?;
    if let TrainStatus::Diverged { iteration, reason } = &run.status {
        // Keep the last finite artifacts on disk for post-mortems.
        run.model.save(&config.model_path())?;
        export::write_loss_history(&config.out_path("loss_history.csv"), &run.history)?;
        return Err(DekError::Diverged {
            iteration: *iteration,
            reason: reason.clone(),
        });
    }

    let model_path = config.model_path();
    run.model.save(&model_path)?;
    let loss_path = config.out_path("loss_history.csv");
    export::write_loss_history(&loss_path, &run.history)?;

    let mut report = ExperimentReport::new("train", config.seed, config.hash()?);
    report.warnings = prepared.warnings;
    report
        .metric("epochs", run.history.len() as f64)
        .metric("first_epoch_loss", *run.history.first().unwrap_or(&f64::NAN))
        .metric("final_epoch_loss", *run.history.last().unwrap_or(&f64::NAN))
        .artifact("model", &model_path)
        .artifact("loss_history", &loss_path);
    let report_path = config.out_path("train_report.json");
    report.save(&report_path)?;
    Ok(report)
}

/// eval: load the trained model, compute the test×train Gram, run the
/// configured consumer, write metric + report (+ PR curve for
/// classification).
pub fn run_eval(config: &RunConfig) -> Result<ExperimentReport> {
    ensure_out_dir(config)?;
    let prepared = prepare(config)?;
    let model = DekModel::load(&config.model_path())?;
    if model.task() != config.task {
        return Err(DekError::InvalidConfig(format!(
            "model task {} does not match configured task {}",
            model.task(),
            config.task
        )));
    }
    let cross = model.gram(&prepared.test.features, &prepared.train.features)?;

    let mut report = ExperimentReport::new("eval", config.seed, config.hash()?);
    report.warnings = prepared.warnings;

    match config.task {
        Task::Classification => {
            let train_labels = prepared.train.labels()?;
            let test_labels = prepared.test.labels()?;
            let pred: Vec<usize> = match config.consumer.kind {
                ConsumerKind::Knn => (0..cross.rows())
                    .map(|q| knn_classify(cross.row(q), train_labels, config.consumer.k))
                    .collect::<Result<_>>()?,
                ConsumerKind::Svm => {
                    let train_gram = model.gram_self(&prepared.train.features)?;
                    let svm = svm_train_one_vs_rest(
                        &train_gram,
                        train_labels,
                        config.consumer.svm_c,
                        config.consumer.svm_tol,
                    )?;
                    svm_predict(&svm, &cross)?
                }
            };
            report.metric("accuracy", metric_accuracy(&pred, test_labels)?);

            let curve = rank_and_pr_curve(&cross, test_labels, train_labels)?;
            if curve.skipped_queries > 0 {
                report
                    .warnings
                    .push(format!("{} queries skipped in pr curve", curve.skipped_queries));
            }
            let pr_path = config.out_path("pr_curve.csv");
            export::write_pr_curve(&pr_path, &curve)?;
            report.artifact("pr_curve", &pr_path);
        }
        Task::Regression => {
            let train_values = prepared.train.values()?;
            let test_values = prepared.test.values()?;
            let weighting = if config.consumer.weighted_knn {
                KnnWeighting::Similarity
            } else {
                KnnWeighting::Uniform
            };
            let pred: Vec<f64> = (0..cross.rows())
                .map(|q| knn_regress(cross.row(q), train_values, config.consumer.k, weighting))
                .collect::<Result<_>>()?;
            report.metric("r2", metric_r2(&pred, test_values)?);
        }
    }

    let report_path = config.out_path("eval_report.json");
    report.save(&report_path)?;
    Ok(report)
}

/// gram: export the DEK Gram — test×train when split < 1, via the trained
/// model.
pub fn run_gram(config: &RunConfig) -> Result<ExperimentReport> {
    ensure_out_dir(config)?;
    let prepared = prepare(config)?;
    let model = DekModel::load(&config.model_path())?;
    let cross = model.gram(&prepared.test.features, &prepared.train.features)?;
    let gram_path = config.out_path("gram.csv");
    export::write_gram(&gram_path, &cross)?;
    let mut report = ExperimentReport::new("gram", config.seed, config.hash()?);
    report.warnings = prepared.warnings;
    report
        .metric("rows", cross.rows() as f64)
        .metric("cols", cross.cols() as f64)
        .artifact("gram", &gram_path);
    let report_path = config.out_path("gram_report.json");
    report.save(&report_path)?;
    Ok(report)
}

/// kpca: fit on the training Gram, project the test split, export
/// coordinates.
pub fn run_kpca(config: &RunConfig) -> Result<ExperimentReport> {
    ensure_out_dir(config)?;
    let prepared = prepare(config)?;
    let model = DekModel::load(&config.model_path())?;
    let train_gram = model.gram_self(&prepared.train.features)?;
    let kpca = kpca_fit(&train_gram, config.kpca_components)?;
    let cross = model.gram(&prepared.test.features, &prepared.train.features)?;
    let coords = kpca_project(&kpca, &cross)?;
    let coords_path = config.out_path("kpca_coords.csv");
    export::write_coordinates(&coords_path, &coords)?;

    let mut report = ExperimentReport::new("kpca", config.seed, config.hash()?);
    report.warnings = prepared.warnings;
    report
        .metric("components", kpca.n_components() as f64)
        .metric("top_eigenvalue", kpca.eigenvalues()[0])
        .artifact("coordinates", &coords_path);
    let report_path = config.out_path("kpca_report.json");
    report.save(&report_path)?;
    Ok(report)
}

/// pairs: dump the PairBatch the configured pairing would produce on the
/// training split. Local pairing uses the trained model when one exists,
/// otherwise a freshly initialized model (the documented iteration-0 state).
pub fn run_pairs(config: &RunConfig) -> Result<ExperimentReport> {
    ensure_out_dir(config)?;
    let prepared = prepare(config)?;
    let batch = match config.task {
        Task::Regression => make_pairs_regression(prepared.train.values()?, config.training.gamma)?,
        Task::Classification => match config.training.pairing {
            Pairing::Full => make_pairs_full(prepared.train.labels()?)?,
            Pairing::Local => {
                let model = if config.model_path().exists() {
                    DekModel::load(&config.model_path())?
                } else {
                    DekModel::new(
                        DekArchitecture {
                            input_dim: prepared.train.dim(),
                            width_factor: config.architecture.width_factor,
                            embedding_layers: config.architecture.embedding_layers,
                            kernel_layers: config.architecture.kernel_layers,
                            activation: config.architecture.activation,
                            task: config.task,
                        },
                        config.seed,
                    )?
                };
                make_pairs_local(
                    &model,
                    &prepared.train.features,
                    prepared.train.labels()?,
                    config.training.recall_level,
                )?
            }
        },
    };
    let pairs_path = config.out_path("pairs.csv");
    export::write_pairs(&pairs_path, &batch)?;
    let mut report = ExperimentReport::new("pairs", config.seed, config.hash()?);
    report.warnings = prepared.warnings;
    report
        .metric("pairs", batch.len() as f64)
        .artifact("pairs", &pairs_path);
    let report_path = config.out_path("pairs_report.json");
    report.save(&report_path)?;
    Ok(report)
}

/// baseline-rbf: grid-search the RBF kernel on the training split only,
/// then evaluate the winning cell on the test split.
pub fn run_baseline_rbf(config: &RunConfig) -> Result<ExperimentReport> {
    ensure_out_dir(config)?;
    let prepared = prepare(config)?;
    let best = rbf_grid_search(
        &prepared.train,
        &config.rbf.gammas,
        &config.rbf.cs,
        config.rbf.folds,
    )?;

    let mut report = ExperimentReport::new("baseline-rbf", config.seed, config.hash()?);
    report.warnings = prepared.warnings;
    report
        .metric("best_gamma", best.gamma)
        .metric("best_c", best.c)
        .metric("cv_score", best.score);
    if best.skipped_folds > 0 {
        report
            .warnings
            .push(format!("{} degenerate folds skipped", best.skipped_folds));
    }

    match config.task {
        Task::Classification => {
            let train_gram = rbf_kernel_self(&prepared.train.features, best.gamma)?;
            let svm = svm_train_one_vs_rest(
                &train_gram,
                prepared.train.labels()?,
                best.c,
                config.consumer.svm_tol,
            )?;
            let cross = rbf_kernel(&prepared.test.features, &prepared.train.features, best.gamma)?;
            let pred = svm_predict(&svm, &cross)?;
            report.metric("accuracy", metric_accuracy(&pred, prepared.test.labels()?)?);
        }
        Task::Regression => {
            let cross = rbf_kernel(&prepared.test.features, &prepared.train.features, best.gamma)?;
            let train_values = prepared.train.values()?;
            let pred: Vec<f64> = (0..cross.rows())
                .map(|q| {
                    knn_regress(cross.row(q), train_values, config.consumer.k, KnnWeighting::Uniform)
                })
                .collect::<Result<_>>()?;
            report.metric("r2", metric_r2(&pred, prepared.test.values()?)?);
        }
    }

    let report_path = config.out_path("baseline_rbf_report.json");
    report.save(&report_path)?;
    Ok(report)
}

/// Convenience for consumers that need the raw gram of a prepared split.
pub fn dek_gram_for(model: &DekModel, features: &Matrix) -> Result<GramMatrix> {
    model.gram_self(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn blob_csv(path: &Path, n: usize) {
        let mut f = std::fs::File::create(path).unwrap();
        writeln!(f, "x,y,label").unwrap();
        for i in 0..n {
            let class = i % 2;
            let c = if class == 0 { -2.0 } else { 2.0 };
            let jx = (i as f64 * 0.7).sin() * 0.3;
            let jy = (i as f64 * 1.3).cos() * 0.3;
            writeln!(f, "{},{},{}", c + jx, c + jy, class).unwrap();
        }
    }

    fn test_config(dir: &Path) -> RunConfig {
        let data = dir.join("blobs.csv");
        blob_csv(&data, 40);
        RunConfig {
            data: data.display().to_string(),
            target_col: "label".into(),
            out_dir: dir.join("out").display().to_string(),
            training: TrainingSection {
                epochs: 30,
                learning_rate: 0.2,
                batch_size: 256,
                ..TrainingSection::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn train_then_eval_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        let train_report = run_train(&config, |_, _| {}).unwrap();
        assert!(config.model_path().exists());
        assert!(config.out_path("loss_history.csv").exists());
        assert!(train_report.metrics["final_epoch_loss"].is_finite());

        let eval_report = run_eval(&config).unwrap();
        let acc = eval_report.metrics["accuracy"];
        assert!(acc > 0.9, "blob accuracy {acc}");
        assert!(config.out_path("pr_curve.csv").exists());
    }

    #[test]
    fn pipeline_is_deterministic_end_to_end() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut config_a = test_config(dir_a.path());
        // Same data file for both runs.
        let mut config_b = config_a.clone();
        config_b.out_dir = dir_b.path().join("out").display().to_string();

        let ta = run_train(&config_a, |_, _| {}).unwrap();
        let tb = run_train(&config_b, |_, _| {}).unwrap();
        let ea = run_eval(&config_a).unwrap();
        let eb = run_eval(&config_b).unwrap();
        config_a.model = None;
        config_b.model = None;
        assert_eq!(ta.metrics, tb.metrics);
        assert_eq!(ea.metrics, eb.metrics);
        assert_eq!(
            std::fs::read_to_string(config_a.out_path("loss_history.csv")).unwrap(),
            std::fs::read_to_string(config_b.out_path("loss_history.csv")).unwrap()
        );
    }

    #[test]
    fn missing_config_fields_are_reported() {
        let config = RunConfig::default();
        assert!(matches!(prepare(&config), Err(DekError::InvalidConfig(_))));
    }
}
