//! `spca`: fit, apply and evaluate supervised PCA models from CSV files.

mod artifact;
mod commands;
mod error;
mod plan;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use spca::data::Task;
use spca::kernel::KernelKind;
use spca::solver::Algorithm;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Reg,
    Class,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Reg => Task::Regression,
            TaskArg::Class => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Cv,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmArg {
    Alt,
    Sub,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Algorithm {
        match a {
            AlgorithmArg::Alt => Algorithm::Alternating,
            AlgorithmArg::Sub => Algorithm::Substitution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Linear,
    Rbf,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> KernelKind {
        match k {
            KernelArg::Linear => KernelKind::Linear,
            KernelArg::Rbf => KernelKind::Rbf,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spca", version, about = "Supervised PCA with Grassmann optimisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column name(s) or zero-based position(s); defaults to the last column.
    #[arg(long, value_delimiter = ',')]
    pub response_col: Vec<String>,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// lspca, lrpca, klspca, klrpca, pcr, pcc, kpcr, kpcc or rrr.
    #[arg(long)]
    pub method: String,
    #[arg(long, value_enum, default_value = "cv")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "alt")]
    pub algorithm: AlgorithmArg,
    #[arg(long)]
    pub r: usize,
    /// Absolute trade-off weight in cv mode. Defaults to the loss/variance scale of the data.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "rbf")]
    pub kernel: KernelArg,
    /// RBF width; defaults to the median pairwise distance.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ridge penalty on the logistic coefficients.
    #[arg(long, default_value_t = 0.0)]
    pub lr_reg: f64,
    /// Scale features to unit variance after centering.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = 100)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub outer_tol: f64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the embedding coordinates.
    #[arg(long)]
    pub embedding: bool,
}

#[derive(Debug, clap::Args)]
pub struct ExperimentArgs {
    /// Plan file (TOML).
    #[arg(long)]
    pub plan: PathBuf,
    /// Overrides the plan's data path.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Overrides the plan's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// Response columns (reg) or classes (class).
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_x2: f64,
    #[arg(long, default_value_t = 25.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sigma_y2: f64,
    #[arg(long, value_enum, default_value = "reg")]
    pub task: TaskArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the true basis as CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and write it to a file.
    Fit(FitArgs),
    /// Apply a saved model to a CSV file.
    Predict(PredictArgs),
    /// Run repeated splits with cross-validation and λ sweeps.
    Experiment(ExperimentArgs),
    /// Draw a dataset from the generative model.
    Synth(SynthArgs),
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SPCA_LOG", "warn"))
        .format_timestamp(None)
        .init();
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SPCA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("SPCA_THREADS must be a count, got '{v}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging();
    let result = init_threads().and_then(|_| match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Experiment(a) => commands::experiment(&a),
        Command::Synth(a) => commands::synth(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spca: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
