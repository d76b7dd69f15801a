//! Batch runner for attractor-forge experiments.

pub mod config;
pub mod run;

use thiserror::Error;

pub use config::{parse_config, ExperimentConfig, ExperimentKind};
pub use run::{run, Outcome};

/// Environment variable capping worker threads (`0` = automatic).
pub const THREADS_ENV: &str = "ATTRACTOR_FORGE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error on line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] attractor_forge::Error),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// Process exit status: 2 for configuration and input problems, 3 for
    /// solver failures.
    pub fn exit_code(&self) -> i32 {
        use attractor_forge::Error as E;
        match self {
            CliError::Core(E::SolverFailure { .. } | E::NonFinite { .. } | E::Internal(_)) => 3,
            _ => 2,
        }
    }
}

/// Sizes the global thread pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Config {
            line: 0,
            message: format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`"),
        })?,
        Err(_) => 0,
    };
    // A pool that is already initialised (e.g. in tests) is left alone.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}
