use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "mixgen", version, about = "Generative design of low-carbon concrete mixes")]
pub struct Cli {
    /// JSON file whose kebab-case keys supply any flag; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the CVAE and the nine property predictors.
    Train(TrainArgs),
    /// Sample mixes from a trained model and score them.
    Generate(GenerateArgs),
    /// Post-generation analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Serve the HTTP API over a model directory.
    Serve(ServeArgs),
    /// Refit the coefficient table from the published lab mixes.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Dominance filter and mean reduction against training bests.
    Reduce(ReduceArgs),
    /// Convex hull of dominating samples in impact space.
    Hull(HullArgs),
    /// Two-dimensional isomap embedding of a mix list.
    Isomap(IsomapArgs),
    /// Conditioned vs. predicted strength sweep.
    Progression(ProgressionArgs),
    /// GWP against regional benchmarks.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset CSV in the UCI column layout.
    #[arg(long)]
    pub data: PathBuf,
    /// Impact coefficient table.
    #[arg(long)]
    pub epd: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run directory; must be absent or empty.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 500)]
    pub predictor_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kl_weight: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model_dir: PathBuf,
    /// Age group (LE3, D7, D14, D28, D56, GE90) or `all`; repeatable.
    #[arg(long = "group", required = true, value_delimiter = ',')]
    pub groups: Vec<String>,
    #[arg(long, default_value_t = 60_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplier applied to the superplasticizer mass after generation.
    #[arg(long, default_value_t = 1.0)]
    pub superplasticizer_scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReduceArgs {
    #[arg(long)]
    pub model_dir: PathBuf,
    /// Samples CSV written by `generate`.
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub group: String,
    /// Band centers in MPa; repeatable.
    #[arg(long = "strength", required = true, value_delimiter = ',')]
    pub strengths: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct HullArgs {
    #[arg(long)]
    pub model_dir: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub group: String,
    #[arg(long)]
    pub strength: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IsomapArgs {
    /// CSV with the seven mass columns and an optional `label` column.
    #[arg(long)]
    pub mixes: PathBuf,
    #[arg(long, default_value_t = mixgen_core::analyze::DEFAULT_K)]
    pub k: usize,
    /// Raise k up to this value until the neighborhood graph is connected.
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProgressionArgs {
    #[arg(long)]
    pub model_dir: PathBuf,
    #[arg(long = "group", required = true, value_delimiter = ',')]
    pub groups: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrengthBasis {
    /// Specified 28-day design strength.
    Target,
    /// Measured 28-day strength.
    Measured,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchmarkArgs {
    /// CSV with `label,strength_mpa,gwp`; defaults to the five lab-tested mixes.
    #[arg(long)]
    pub mixes: Option<PathBuf>,
    /// Which strength of the lab mixes selects the benchmark class.
    #[arg(long, value_enum, default_value_t = StrengthBasis::Target)]
    pub strength_basis: StrengthBasis,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub model_dir: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub out: PathBuf,
}
