//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mirror_bounds::SetupKind;

#[derive(Debug, Parser)]
#[command(
    name = "mirror-bounds",
    version,
    about = "Stochastic mirror descent with nonasymptotic confidence intervals on optimal values"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs one solver and emits its run record as JSON.
    Solve(SolveArgs),
    /// Computes one confidence interval on the optimal value.
    Ci(CiArgs),
    /// Runs a coverage or width-sweep study from a JSON configuration.
    Coverage(ExperimentArgs),
    /// Runs the paired single-stage and multistep comparison from a JSON configuration.
    Compare(ExperimentArgs),
    /// Evaluates a polyhedral risk measure on a discrete distribution.
    EprmEval(EprmArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Quadratic,
    Cvar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Setup {
    Euclidean,
    Entropy,
    Pnorm,
}

impl From<Setup> for SetupKind {
    fn from(s: Setup) -> Self {
        match s {
            Setup::Euclidean => SetupKind::Euclidean,
            Setup::Entropy => SetupKind::Entropy,
            Setup::Pnorm => SetupKind::PNorm,
        }
    }
}

/// The generated test instance. The constant sheet is stated in the norm of
/// the chosen proximal setup.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long, value_enum, default_value = "quadratic")]
    pub family: Family,
    /// Problem size.
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 0.9)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda0: f64,
    /// CVaR level of the portfolio instance.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Scenario pool size of the portfolio instance.
    #[arg(long, default_value_t = 10_000)]
    pub pool: usize,
    /// Seed of the instance data.
    #[arg(long, default_value_t = 0)]
    pub instance_seed: u64,
    #[arg(long, value_enum, default_value = "entropy")]
    pub setup: Setup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Rsa,
    Smd,
    Msmd,
    MsmdBudget,
    MsmdBall,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, value_enum, default_value = "smd")]
    pub algorithm: AlgorithmArg,
    /// Oracle calls of single-stage runs and the allowance of the budgeted method.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    /// Seed of the sample stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant step replacing the method's own stepsize.
    #[arg(long)]
    pub step: Option<f64>,
    /// Stage count of the fixed-step multistep methods.
    #[arg(long, default_value_t = 4)]
    pub stages: usize,
    /// Θ sizing the stages of the ball-restricted method.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Record every `stride`-th iterate in the trace (0 disables it).
    #[arg(long, default_value_t = 0)]
    pub stride: usize,
    /// Write the run record here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiMethodArg {
    Smd1,
    Smd2,
    Asymptotic,
    Multistep,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, value_enum, default_value = "smd1")]
    pub method: CiMethodArg,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// θ of the constant step for `smd2`, Θ of the multistep interval.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Sample size.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stage count of the ball-restricted multistep run.
    #[arg(long, default_value_t = 4)]
    pub stages: usize,
    /// Print the interval as JSON.
    #[arg(long)]
    pub json: bool,
}

/// A batch experiment: a JSON configuration with optional overrides.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Grid cells as `n:N` pairs, for example `40:1000,100:1000`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<String>>,
    #[arg(long)]
    pub filter: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub thetas: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub setup: Option<Setup>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub reference_tol: Option<f64>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EprmArgs {
    /// Model JSON file.
    #[arg(long, conflicts_with = "cvar", required_unless_present = "cvar")]
    pub model: Option<PathBuf>,
    /// Use CVaR at this level instead of a model file.
    #[arg(long)]
    pub cvar: Option<f64>,
    /// Atoms of the distribution.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub atoms: Vec<f64>,
    /// Probabilities of the atoms; uniform when absent.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Bound on the first-stage variable used with `--cvar`; the largest
    /// atom magnitude (at least 1) when absent.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub json: bool,
}
