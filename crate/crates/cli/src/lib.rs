//! `polymp` subcommands: dataset generation, training, evaluation, grid
//! benchmarks, gradient checks and saliency export.

pub mod commands;

use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use polymp_core::dataset::DatasetError;
use polymp_core::models::ModelError;
use polymp_core::training::TrainError;
use thiserror::Error;

pub use commands::benchmark::BenchmarkArgs;
pub use commands::eval::EvalArgs;
pub use commands::gen_data::GenDataArgs;
pub use commands::gradcheck::GradcheckArgs;
pub use commands::saliency::SaliencyArgs;
pub use commands::train::{ExperimentSpec, TrainArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    IncompatibleCheckpoint(String),
    #[error("{0}")]
    GradCheckFailed(String),
    #[error("sample {0} not found")]
    SampleNotFound(usize),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    /// Stable name used as the first field of the stderr line.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Dataset(DatasetError::EmptyDataset) | CliError::Train(TrainError::EmptyDataset) => "EmptyDataset",
            CliError::Dataset(DatasetError::CorruptRecord { .. }) => "CorruptRecord",
            CliError::Dataset(DatasetError::Io { .. }) | CliError::Io { .. } => "IOErr",
            CliError::Dataset(_) => "DatasetError",
            CliError::Train(TrainError::LabelOutOfRange { .. }) => "LabelOutOfRange",
            CliError::Train(TrainError::IncompatibleBackbone(_)) => "IncompatibleBackbone",
            CliError::Train(_) => "TrainError",
            CliError::Model(_) => "ModelError",
            CliError::IncompatibleCheckpoint(_) => "IncompatibleCheckpoint",
            CliError::GradCheckFailed(_) => "GradCheckFailed",
            CliError::SampleNotFound(_) => "SampleNotFound",
            CliError::Config(_) => "ConfigError",
        }
    }

    /// `kind: message` on a single line.
    pub fn one_line(&self) -> String {
        format!("{}: {}", self.kind(), self.to_string().replace(['\n', '\r'], " "))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

#[derive(Debug, Parser)]
#[command(name = "polymp", version, about = "Polygon shape classification experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic letter dataset with all transform-ratio splits.
    GenData(GenDataArgs),
    /// Train one model on one ratio split and evaluate it on the test split.
    Train(TrainArgs),
    /// Evaluate a checkpoint, optionally on the simplified test view.
    Eval(EvalArgs),
    /// Train and evaluate an architecture x ratio grid.
    Benchmark(BenchmarkArgs),
    /// Finite-difference check of every parameter gradient.
    Gradcheck(GradcheckArgs),
    /// Export per-node saliency as JSON and SVG.
    Saliency(SaliencyArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => commands::gen_data::run(&a),
        Command::Train(a) => commands::train::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Benchmark(a) => commands::benchmark::run(&a),
        Command::Gradcheck(a) => commands::gradcheck::run(&a),
        Command::Saliency(a) => commands::saliency::run(&a),
    }
}
