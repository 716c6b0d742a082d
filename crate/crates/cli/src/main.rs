//! Command-line surface for the estimation engine.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or schema error,
//! 3 numerical non-convergence.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "eigenprob",
    about = "Joint, conditional and marginal probability estimation over mixed tabular data",
    version
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonOpts {
    /// Dataset CSV (header row required).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Schema JSON describing each column; omitted bounds and category lists
    /// are inferred from the data.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Fitted model file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Seed for randomized subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the model's discrete peakedness.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Override the model's continuous concentration.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Override the damping factor.
    #[arg(long, global = true)]
    pub damping: Option<f64>,
    /// Leave-one-out masking (on|off).
    #[arg(long, global = true, value_parser = parse_on_off)]
    pub loo: Option<bool>,
    /// Output path; stdout when omitted (model output defaults to model.json).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format for reports and predictions.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Size of the worker thread pool.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

fn parse_on_off(value: &str) -> Result<bool, String> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected 'on' or 'off', got {other:?}")),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit hyperparameters by the likelihood grid search and write a model file.
    Fit {
        /// Comma-separated alpha grid (default 0,1,...,15).
        #[arg(long)]
        alpha_grid: Option<String>,
        /// Comma-separated beta grid (default 1,2,...,15).
        #[arg(long)]
        beta_grid: Option<String>,
        /// Write the likelihood surface as CSV (alpha,beta,loglik).
        #[arg(long)]
        surface: Option<PathBuf>,
        /// Embed the dataset rows in the model file instead of referencing the
        /// CSV by path and digest.
        #[arg(long)]
        embed_data: bool,
    },
    /// Predict the most likely value of a discrete attribute per query row.
    Classify {
        /// Target attribute name.
        #[arg(long)]
        target: String,
    },
    /// Predict the conditional mean of a continuous attribute per query row.
    Regress {
        #[arg(long)]
        target: String,
    },
    /// Fill missing cells of each query row.
    Impute {
        #[arg(long, value_enum, default_value_t = ImputeModeArg::MostLikely)]
        mode: ImputeModeArg,
    },
    /// Score stored rows by leave-one-out joint log probability.
    Outliers {
        /// Flagging threshold; defaults to the empirical 1st percentile.
        #[arg(long)]
        threshold: Option<f64>,
        /// Write a histogram CSV (bin_left,bin_right,count).
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// Generate random rows distributed like the training data.
    Generate {
        #[arg(short = 'n', long)]
        count: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Chain)]
        method: MethodArg,
        #[arg(long, default_value_t = 10)]
        burn_in: usize,
        #[arg(long, default_value_t = 1)]
        thinning: usize,
    },
    /// Soft-cluster the objects of a dataset.
    Cluster {
        #[arg(short = 'k', long)]
        clusters: usize,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 300)]
        max_iter: usize,
        /// Attribute holding ground-truth labels; excluded from the graph and
        /// used to report V-measure, Rand index and pairwise F-measure.
        #[arg(long)]
        truth: Option<String>,
        /// Write hard labels to a separate CSV.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Total log likelihood of the stored dataset.
    Loglik,
    /// Leave-one-out cross-validated classification accuracy.
    LooCv {
        #[arg(long)]
        target: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImputeModeArg {
    MostLikely,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Chain,
    Gibbs,
}

/// Errors carrying their process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(eigenprob::Error),
}

impl From<eigenprob::Error> for CliError {
    fn from(e: eigenprob::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(eigenprob::Error::NoConvergence { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    if let Some(threads) = cli.common.threads {
        // a second initialization attempt is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
