//! `jointcast` command line: fit joint predictive models, draw predictive
//! samples, estimate joint probabilities, evaluate models, run the synthetic
//! copula-learning benchmark, and reproduce the height/weight demonstration.

mod commands;
mod event;
mod manifest;

use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

/// Usage errors exit with 2, runtime failures with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<jointcast_core::Error> for CliError {
    fn from(e: jointcast_core::Error) -> Self {
        CliError::Runtime(anyhow::Error::new(e))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(anyhow::Error::new(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "jointcast", version, about = "Probabilistic multi-response prediction")]
pub struct Cli {
    /// Cap the worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Print progress to standard error (repeat for more detail).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a joint model from a CSV file.
    Fit(FitArgs),
    /// Draw predictive samples for one covariate row or a covariate file.
    Predict(PredictArgs),
    /// Estimate a joint probability for one covariate row.
    Prob(ProbArgs),
    /// Evaluate fitted models on a test CSV (ACvM and AMSE).
    Evaluate(EvaluateArgs),
    /// Synthetic copula-learning benchmark (one-sample CvM per architecture).
    Benchmark(BenchmarkArgs),
    /// End-to-end demonstration on the bundled height/weight data.
    Demo(DemoArgs),
    /// Re-run a command recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    /// Input CSV (header row, comma delimiter).
    #[arg(long)]
    pub data: String,
    /// Comma-separated response column names.
    #[arg(long, value_delimiter = ',')]
    pub responses: Vec<String>,
    /// Comma-separated covariate column names.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Marginal model: forest | glm.
    #[arg(long, default_value = "forest")]
    pub marginal: String,
    /// Dependence model: gmmn | gaussian | t | clayton | gumbel | frank |
    /// empirical-beta | independence.
    #[arg(long, default_value = "gmmn")]
    pub dependence: String,
    /// Generator architecture as <layers>x<width>, e.g. 1x100.
    #[arg(long, default_value = "1x100")]
    pub arch: String,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    /// Mini-batch size for generator training (default: full batch).
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    /// Disable batch normalization in the generator.
    #[arg(long)]
    pub no_batch_norm: bool,
    /// Kernel bandwidth mixture.
    #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.01, 0.15, 0.25, 0.50, 0.75])]
    pub bandwidths: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub n_trees: usize,
    /// Split candidates per node (default: max(1, p/3)).
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub min_node_size: usize,
    /// Hold out this many rows (seeded) before fitting; the model trains on
    /// the remainder.
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Where to write the held-out rows as CSV (requires --n-test).
    #[arg(long)]
    pub test_out: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model file (JSON blob); a manifest is written next to it.
    #[arg(long)]
    pub out: String,
}

#[derive(Args, Debug, Clone)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: String,
    /// Covariate row as name=value pairs, e.g. age=6,male=1.
    #[arg(long)]
    pub z: Option<String>,
    /// CSV of covariate rows (block scheme: one shared generated batch).
    #[arg(long)]
    pub covariate_file: Option<String>,
    /// Draws for a single covariate row.
    #[arg(long, default_value_t = 1000)]
    pub n_gen: usize,
    /// Draws per covariate row with --covariate-file.
    #[arg(long, default_value_t = 5)]
    pub n_gen_each: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: String,
}

#[derive(Args, Debug, Clone)]
pub struct ProbArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub z: String,
    /// Event such as "d1>116,d2<21" (1-based dimensions or response names).
    #[arg(long)]
    pub event: String,
    #[arg(long, default_value_t = 1000)]
    pub n_gen: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    /// Model file; repeat to evaluate several models into one report.
    #[arg(long, required = true)]
    pub model: Vec<String>,
    /// Label per model (defaults to the dependence label).
    #[arg(long)]
    pub label: Vec<String>,
    /// Test CSV with the columns named at fit time.
    #[arg(long)]
    pub test: String,
    #[arg(long, default_value_t = 25)]
    pub n_rep: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_gen: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "eval-out")]
    pub out_dir: String,
}

#[derive(Args, Debug, Clone)]
pub struct BenchmarkArgs {
    /// clayton | t4.
    #[arg(long, default_value = "clayton")]
    pub family: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 5000)]
    pub n_trn: usize,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    /// Generated samples per architecture (B).
    #[arg(long, default_value_t = 25)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_gen: usize,
    #[arg(long, default_value_t = 500)]
    pub batch_size: usize,
    /// Architectures as <layers>x<width> list.
    #[arg(long, value_delimiter = ',', default_values_t = ["1x100".to_string(), "1x300".to_string(), "1x600".to_string(), "2x600".to_string(), "3x300".to_string()])]
    pub architectures: Vec<String>,
    /// Reference-CDF Monte-Carlo sample size (elliptical, dim > 2).
    #[arg(long, default_value_t = 20000)]
    pub mc_cdf_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "benchmark.csv")]
    pub out: String,
}

#[derive(Args, Debug, Clone)]
pub struct DemoArgs {
    /// Demo target; `height-weight` is the only one.
    #[arg(default_value = "height-weight")]
    pub target: String,
    /// Use the bundled data fixture instead of downloading.
    #[arg(long)]
    pub offline: bool,
    #[arg(long, default_value_t = 271)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 500)]
    pub n_trees: usize,
    #[arg(long, default_value_t = 25)]
    pub n_rep: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_gen: usize,
    #[arg(long, default_value = "demo-out")]
    pub out_dir: String,
}

#[derive(Args, Debug, Clone)]
pub struct RerunArgs {
    /// Manifest written by a previous run.
    #[arg(long)]
    pub manifest: String,
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        // ignore failure: the global pool may already be configured
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let verbose = cli.verbose;
    match cli.command {
        Command::Fit(args) => commands::fit::run(&args, verbose),
        Command::Predict(args) => commands::predict::run(&args, verbose),
        Command::Prob(args) => commands::prob::run(&args, verbose),
        Command::Evaluate(args) => commands::evaluate::run(&args, verbose),
        Command::Benchmark(args) => commands::benchmark::run(&args, verbose),
        Command::Demo(args) => commands::demo::run(&args, verbose),
        Command::Rerun(args) => commands::rerun::run(&args, verbose),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
