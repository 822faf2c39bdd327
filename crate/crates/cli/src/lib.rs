//! Command-line front end for the `stradic` solver: solve registry problems,
//! run the verification suite, fit convergence rates and write traces.
//!
//! Exit codes: 0 converged (or suite clean), 1 suite violations, 2 iteration
//! limit reached, 3 invalid input or run error, 4 unknown problem.

pub mod commands;
pub mod output;
pub mod spec;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{cmd_list_problems, cmd_rate, cmd_solve, cmd_verify};
pub use spec::RunSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_ERROR: i32 = 3;
pub const EXIT_UNKNOWN_PROBLEM: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown problem `{name}`; registered problems: {}", available.join(", "))]
    UnknownProblem { name: String, available: Vec<String> },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownProblem { .. } => EXIT_UNKNOWN_PROBLEM,
            CliError::Invalid(_) | CliError::Io(_) => EXIT_ERROR,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "stradic", version, about = "Stochastic trust-funnel solver with AdaGrad stepsizes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a registry problem once per seed; write traces and a summary.
    Solve(RunArgs),
    /// Run the property suite; exit 0 iff no violations.
    Verify(VerifyArgs),
    /// Multi-seed runs of fixed length; fit the log-log slope of the mean running average.
    Rate(RateArgs),
    /// Print the registered problems.
    ListProblems,
}

/// A run spec file plus flag overrides; flags win over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    /// CSV of rows (features..., target) replacing the `lsq-simplex` data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// One of exact, gaussian, step_proportional, finite_sum, history_relaxed.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub kappa_dir2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Comma-separated history weights, most recent first.
    #[arg(long, value_delimiter = ',')]
    pub coefficients: Option<Vec<f64>>,
    /// Seed; repeat or comma-separate for several.
    #[arg(long = "seed", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub theta_n: Option<f64>,
    #[arg(long)]
    pub theta_t: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub varsigma: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub kappa_n: Option<f64>,
    #[arg(long)]
    pub eps_d: Option<f64>,
    #[arg(long)]
    pub eps_c: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// zero, exact, bb or lbfgs:<memory>.
    #[arg(long)]
    pub hessian: Option<String>,
    /// Truncated-CG refinement of the tangential step.
    #[arg(long)]
    pub refine: Option<bool>,
    /// Write the resolved run spec here and continue.
    #[arg(long)]
    pub write_spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Run only these sections (projections, lemmas, adagrad, noise).
    #[arg(long, value_delimiter = ',')]
    pub filter: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0u64, 1, 2])]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
    /// Random projection instances compared with the enumeration oracle.
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub instance_seed: u64,
    /// Fault injection: multiply every stepsize by this factor.
    #[arg(long)]
    pub fault_alpha_scale: Option<f64>,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Keep the stopping test active; by default every run lasts `max_iter` iterations.
    #[arg(long)]
    pub allow_early_stop: bool,
    /// Destination of the (k, average) CSV; defaults to `<output>/rate.csv`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Rate(args) => cmd_rate(&args),
        Command::ListProblems => cmd_list_problems(),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}
