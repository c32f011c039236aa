//! The `mlrate` command line.
//!
//! Subcommands: `estimate` on a CSV, `simulate` coverage studies, `train` and
//! `predict` for reusable models, and `generate` for synthetic datasets.
//! Exit codes are 0 on success, 1 on internal failure and 2 on bad input.

pub mod estimate;
pub mod generate;
pub mod learner;
pub mod model;
mod output;
pub mod simulate;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mlrate_core::Error;

pub use learner::LearnerArgs;
pub use model::{ModelFile, Provenance, MODEL_VERSION};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "MLRATE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mlrate", version, about = "Regression-adjusted treatment effect estimation with cross-fitted ML predictions")]
pub struct Cli {
    /// Worker threads (default: MLRATE_THREADS, else all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the treatment effect on a CSV dataset
    Estimate(estimate::EstimateArgs),
    /// Run a Monte Carlo coverage and interval-width study
    Simulate(simulate::SimulateArgs),
    /// Train and save fold models or a pre-period model
    Train(model::TrainArgs),
    /// Append model predictions to a CSV file
    Predict(model::PredictArgs),
    /// Write a synthetic dataset to CSV
    Generate(generate::GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

/// Comma-separated list argument.
pub(crate) fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub(crate) fn user_error(message: impl Into<String>) -> Error {
    Error::InvalidArgument(message.into())
}

/// Thread count from `--threads`, then `MLRATE_THREADS`, then 0 (all cores).
pub fn resolve_threads(flag: Option<usize>) -> Result<usize, Error> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| user_error(format!("{THREADS_ENV} must be a non-negative integer, got `{raw}`"))),
        Err(_) => Ok(0),
    }
}

/// Runs a parsed command, writing results to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Error> {
    let threads = resolve_threads(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::StudyFailed(format!("cannot start worker pool: {e}")))?;
    let workers = pool.current_num_threads();
    let mut buffer = Vec::new();
    pool.install(|| {
        let sink: &mut dyn Write = &mut buffer;
        match cli.command {
            Command::Estimate(args) => estimate::run(&args, sink),
            Command::Simulate(args) => simulate::run(&args, workers, sink),
            Command::Train(args) => model::train(&args, sink),
            Command::Predict(args) => model::predict(&args, sink),
            Command::Generate(args) => generate::run(&args, sink),
        }
    })?;
    out.write_all(&buffer).map_err(|source| Error::Io {
        path: "<stdout>".into(),
        source,
    })
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_user_error() {
                EXIT_USER
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

/// Path argument that may be `-` for standard output.
pub(crate) fn is_stdout(path: &Option<PathBuf>) -> bool {
    path.as_ref().map_or(true, |p| p.as_os_str() == "-")
}
