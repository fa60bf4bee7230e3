//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::table::Format;

#[derive(Debug, Parser)]
#[command(name = "specgrad", version, about = "Error tables, gradient bounds, gradient checks and toy training for differentiable matrix square roots")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Taylor / Padé approximation error of 1/(1-x) over a ratio x degree grid.
    ApproxTable(ApproxArgs),
    /// Worst-case gradient magnitude per backward scheme.
    Bounds(BoundsArgs),
    /// Finite-difference check of one layer configuration (JSON report).
    Gradcheck(GradcheckArgs),
    /// Condition numbers of covariance matrices from a feature file or synthetic data.
    Condition(ConditionArgs),
    /// Hybrid Newton-Schulz / eigendecomposition training on a toy task (JSON lines).
    TrainToy(TrainArgs),
    /// Write synthetic feature blocks to a GCPF file.
    GenFeatures(GenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random draw; falls back to SPECGRAD_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File of key=value lines; explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Taylor,
    Pade,
    Both,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Both)]
    pub kind: KindArg,
    /// Comma-separated degrees.
    #[arg(long, default_value = "50,100,200,300")]
    pub degrees: String,
    /// Comma-separated ratios in [0, 1).
    #[arg(long, default_value = "0.1,0.3,0.5,0.7,0.9,0.99,0.999")]
    pub ratios: String,
    #[arg(long, default_value = "double")]
    pub precision: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, default_value = "double")]
    pub precision: String,
    /// Taylor / Padé degree.
    #[arg(long, default_value_t = 100)]
    pub degree: usize,
    #[arg(long, default_value_t = 1e10)]
    pub trunc_threshold: f64,
    #[arg(long, default_value_t = 19)]
    pub pi_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub ns_iters: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ForwardArg {
    Eig,
    Ns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Sum,
    Trace,
    RandomLinear,
}

/// Backward scheme selection shared by `gradcheck` and `train-toy`.
#[derive(Debug, Clone, Args)]
pub struct SchemeArgs {
    /// Top-N kept eigenpairs (topn).
    #[arg(long)]
    pub topn: Option<usize>,
    /// Taylor / Padé degree.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Truncation threshold (trunc).
    #[arg(long)]
    pub trunc_threshold: Option<f64>,
    /// Iterations for ns-backward or power iteration.
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// ordinary, topn, trunc, taylor, pade, ns-backward.
    #[arg(long, default_value = "ordinary")]
    pub scheme: String,
    #[arg(long, value_enum, default_value_t = ForwardArg::Eig)]
    pub forward: ForwardArg,
    #[command(flatten)]
    pub scheme_args: SchemeArgs,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    /// Samples per feature block; default max(16, 2d).
    #[arg(long)]
    pub n: Option<usize>,
    /// Covariance condition number (geometric spectrum from 1 to 1/cond).
    #[arg(long, default_value_t = 10.0)]
    pub cond: f64,
    #[arg(long, value_enum, default_value_t = LossArg::RandomLinear)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value = "double")]
    pub precision: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    /// GCPF feature file; synthetic blocks are generated when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Prescribed condition number; Gaussian features when absent.
    #[arg(long)]
    pub cond: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Gaussian,
    Fine,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Scheme used after the swap.
    #[arg(long, default_value = "pade")]
    pub backward: String,
    #[command(flatten)]
    pub scheme_args: SchemeArgs,
    #[arg(long, value_enum, default_value_t = DatasetArg::Gaussian)]
    pub dataset: DatasetArg,
    /// Feature channels (raw inputs have the same count).
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 40)]
    pub samples_per_class: usize,
    #[arg(long, default_value_t = 12)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 600)]
    pub steps: usize,
    /// Fraction of steps trained with Newton-Schulz; 1 or more never swaps.
    #[arg(long, default_value_t = 0.6)]
    pub switch_frac: f64,
    #[arg(long, default_value_t = 0.05)]
    pub warmup_frac: f64,
    /// Base rate for the default schedule (/10 at 70% and 90% of steps).
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Explicit schedule as `step:lr` pairs, e.g. `0:0.1,420:0.01`.
    #[arg(long)]
    pub lr_schedule: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub ns_iters: usize,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Prescribed condition number; Gaussian features when absent.
    #[arg(long)]
    pub cond: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}
