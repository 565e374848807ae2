//! `dek` — train a deep embedding kernel and run its consumers.
//!
//! Subcommands: train, eval, gram, kpca, pairs, baseline-rbf, report.
//! Every failure exits nonzero with a single machine-parseable line of the
//! form `error[CODE]: message` on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dek_core::error::DekError;
use dek_core::model::Task;
use dek_core::pipeline::{
    run_baseline_rbf, run_eval, run_gram, run_kpca, run_pairs, run_train, ConsumerKind, RunConfig,
};
use dek_core::report::ExperimentReport;
use dek_core::train::Pairing;

#[derive(Parser)]
#[command(name = "dek", version, about = "Trainable-kernel toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Classification,
    Regression,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairingArg {
    Full,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConsumerArg {
    Knn,
    Svm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Relu,
    Sigmoid,
    Tanh,
}

/// Flags shared by every data-driven subcommand; each one overrides the
/// matching config-file key.
#[derive(Args)]
struct CommonArgs {
    /// TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV path.
    #[arg(long)]
    data: Option<String>,
    /// Target column name (or index when the file has no header).
    #[arg(long)]
    target_col: Option<String>,
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    /// Train fraction of the split, in (0,1).
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Model file to read (eval/gram/kpca/pairs) — defaults to the one
    /// `train` writes under out_dir.
    #[arg(long)]
    model: Option<String>,
    /// Disable feature standardization.
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, value_enum)]
    consumer: Option<ConsumerArg>,
    /// Neighbor count for KNN consumers.
    #[arg(long)]
    k: Option<usize>,
    /// Retained components for kpca.
    #[arg(long)]
    components: Option<usize>,
    /// Regression pair-target scale γ.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    pairing: Option<PairingArg>,
    #[arg(long)]
    recall_level: Option<f64>,
    #[arg(long)]
    pairing_interval: Option<usize>,
    /// Learning rate for train.
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Cap on training pairs per reference sample.
    #[arg(long)]
    max_pairs_per_ref: Option<usize>,
    /// Width factor α (embedding width k = α·d).
    #[arg(long)]
    width_factor: Option<usize>,
    /// Hidden activation of both component networks.
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    /// Soft-margin C for SVM consumers.
    #[arg(long)]
    svm_c: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes model file, loss history, and a report.
    Train(CommonArgs),
    /// Evaluate a trained model with the configured consumer.
    Eval(CommonArgs),
    /// Export the test×train kernel matrix of a trained model.
    Gram(CommonArgs),
    /// Kernel PCA on the training Gram; exports projected test coordinates.
    Kpca(CommonArgs),
    /// Dump the training PairBatch for inspection.
    Pairs(CommonArgs),
    /// Grid-searched RBF baseline on the same split.
    BaselineRbf(CommonArgs),
    /// Pretty-print a stored report.
    Report {
        /// Path to a report JSON file.
        #[arg(long)]
        path: PathBuf,
    },
}

fn resolve_config(args: &CommonArgs) -> Result<RunConfig, DekError> {
    let mut config: RunConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| DekError::io(path, e))?;
            toml::from_str(&text)
                .map_err(|e| DekError::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = &args.data {
        config.data = v.clone();
    }
    if let Some(v) = &args.target_col {
        config.target_col = v.clone();
    }
    if let Some(v) = args.task {
        config.task = match v {
            TaskArg::Classification => Task::Classification,
            TaskArg::Regression => Task::Regression,
        };
    }
    if let Some(v) = args.split {
        config.split = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = &args.out_dir {
        config.out_dir = v.clone();
    }
    if let Some(v) = &args.model {
        config.model = Some(v.clone());
    }
    if args.no_standardize {
        config.standardize = false;
    }
    if let Some(v) = args.consumer {
        config.consumer.kind = match v {
            ConsumerArg::Knn => ConsumerKind::Knn,
            ConsumerArg::Svm => ConsumerKind::Svm,
        };
    }
    if let Some(v) = args.k {
        config.consumer.k = v;
    }
    if let Some(v) = args.components {
        config.kpca_components = v;
    }
    if let Some(v) = args.gamma {
        config.training.gamma = v;
    }
    if let Some(v) = args.pairing {
        config.training.pairing = match v {
            PairingArg::Full => Pairing::Full,
            PairingArg::Local => Pairing::Local,
        };
    }
    if let Some(v) = args.recall_level {
        config.training.recall_level = v;
    }
    if let Some(v) = args.pairing_interval {
        config.training.pairing_interval = v;
    }
    if let Some(v) = args.learning_rate {
        config.training.learning_rate = v;
    }
    if let Some(v) = args.epochs {
        config.training.epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.training.batch_size = v;
    }
    if let Some(v) = args.max_pairs_per_ref {
        config.training.max_pairs_per_ref = Some(v);
    }
    if let Some(v) = args.width_factor {
        config.architecture.width_factor = v;
    }
    if let Some(v) = args.activation {
        config.architecture.activation = match v {
            ActivationArg::Relu => dek_core::Activation::Relu,
            ActivationArg::Sigmoid => dek_core::Activation::Sigmoid,
            ActivationArg::Tanh => dek_core::Activation::Tanh,
        };
    }
    if let Some(v) = args.svm_c {
        config.consumer.svm_c = v;
    }
    Ok(config)
}

fn print_report(report: &ExperimentReport) {
    for (name, value) in &report.metrics {
        println!("{name} {value}");
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

fn dispatch(command: Command) -> Result<(), DekError> {
    match command {
        Command::Train(args) => {
            let config = resolve_config(&args)?;
            let report = run_train(&config, |epoch, loss| {
                eprintln!("epoch {epoch} mean_loss {loss:.6}");
            })?;
            print_report(&report);
            println!("model {}", config.model_path().display());
        }
        Command::Eval(args) => {
            let config = resolve_config(&args)?;
            let report = run_eval(&config)?;
            print_report(&report);
        }
        Command::Gram(args) => {
            let config = resolve_config(&args)?;
            let report = run_gram(&config)?;
            print_report(&report);
        }
        Command::Kpca(args) => {
            let config = resolve_config(&args)?;
            let report = run_kpca(&config)?;
            print_report(&report);
        }
        Command::Pairs(args) => {
            let config = resolve_config(&args)?;
            let report = run_pairs(&config)?;
            print_report(&report);
        }
        Command::BaselineRbf(args) => {
            let config = resolve_config(&args)?;
            let report = run_baseline_rbf(&config)?;
            print_report(&report);
        }
        Command::Report { path } => {
            let report = ExperimentReport::load(&path)?;
            println!("command: {}", report.command);
            println!("seed: {}", report.seed);
            println!("config_hash: {}", report.config_hash);
            println!("created_unix_seconds: {}", report.created_unix_seconds);
            for (name, value) in &report.metrics {
                println!("metric {name}: {value}");
            }
            for (name, path) in &report.artifacts {
                println!("artifact {name}: {path}");
            }
            for w in &report.warnings {
                println!("warning: {w}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
