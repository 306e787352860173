use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use swnn_core::{Fallback, SupportMode};

#[derive(Debug, Parser)]
#[command(
    name = "swnn",
    version,
    about = "Sparse weighted nearest-neighbor multi-label classifier"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Five-number summaries of label and feature counts
    Stats(StatsArgs),
    /// Build the inverted index from training data and write it to disk
    Index(IndexArgs),
    /// Rank labels for each test entry (tab-separated label:score)
    Predict(PredictArgs),
    /// Rank labels with sparse one-vs-rest linear weights
    OvrPredict(OvrPredictArgs),
    /// Precision@K of the classifier on a labelled test set
    Eval(EvalArgs),
    /// Precision@K of an existing prediction file
    Score(ScoreArgs),
    /// Single-thread per-query latency
    Bench(BenchArgs),
    /// Smallest Gram-matrix eigenvalue of the similarity on sampled entries
    KernelCheck(KernelCheckArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset in repository text format
    pub dataset: PathBuf,
    /// Print JSON instead of a table
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where the training index comes from.
#[derive(Debug, Args)]
pub struct ModelSource {
    /// Training data; the index is built in memory
    #[arg(long, conflicts_with = "index")]
    pub train: Option<PathBuf>,
    /// Prebuilt index written by `swnn index`
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Neighborhood size [default: mean labels per training entry, rounded up]
    #[arg(long = "S", value_name = "N")]
    pub s: Option<usize>,
    /// Vote-weight exponent
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Jaccard exponent (non-negative integer)
    #[arg(long, default_value_t = 1, value_parser = parse_beta)]
    pub beta: u32,
    /// Labels returned per query
    #[arg(long, default_value_t = 5)]
    pub topk: usize,
    /// Behavior when no training entry shares a feature with the query
    #[arg(long, value_enum, default_value_t = FallbackArg::None)]
    pub fallback: FallbackArg,
    /// Query support used in the Jaccard term
    #[arg(long, value_enum, default_value_t = SupportArg::Full)]
    pub support: SupportArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelSource,
    #[arg(long)]
    pub test: PathBuf,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hp: HyperArgs,
    /// Worker threads [default: logical cores]
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OvrPredictArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub topk: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelSource,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub hp: HyperArgs,
    /// Comma-separated K values
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 5])]
    pub k: Vec<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Sweep the (alpha, beta) grid, then S in {25, 50, 75} for the best pair
    #[arg(long)]
    pub grid: bool,
    /// Print JSON instead of a table
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report here
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include per-query latency in the report
    #[arg(long)]
    pub latency: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Prediction file written by `predict`
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 5])]
    pub k: Vec<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelSource,
    /// Query set; required unless --synthetic is given
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Generate data instead: entries,features,nnz
    #[arg(long, value_name = "N,D,NNZ", conflicts_with_all = ["train", "index", "test"])]
    pub synthetic: Option<String>,
    /// Number of queries to time (synthetic mode, or a prefix of --test)
    #[arg(long)]
    pub queries: Option<usize>,
    #[command(flatten)]
    pub hp: HyperArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct KernelCheckArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Entries sampled per Gram matrix (at most 64)
    #[arg(long, default_value_t = 30)]
    pub sample: usize,
    /// Number of independent samples
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0u32, 1, 2, 3], value_parser = parse_beta)]
    pub betas: Vec<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FallbackArg {
    None,
    Popular,
}

impl From<FallbackArg> for Fallback {
    fn from(f: FallbackArg) -> Self {
        match f {
            FallbackArg::None => Fallback::None,
            FallbackArg::Popular => Fallback::Popular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupportArg {
    Full,
    InVocabulary,
}

impl From<SupportArg> for SupportMode {
    fn from(s: SupportArg) -> Self {
        match s {
            SupportArg::Full => SupportMode::Full,
            SupportArg::InVocabulary => SupportMode::InVocabulary,
        }
    }
}

fn parse_beta(s: &str) -> Result<u32, String> {
    s.parse::<u32>().map_err(|_| {
        format!("beta must be a non-negative integer (fractional exponents are not supported), got {s:?}")
    })
}
