//! Command-line front end: scenario files in, CSV and JSON out.
//!
//! Exit status: 0 when the run passes its check, 1 when it fails or a
//! numerical step breaks down, 2 for usage errors and malformed input.

use std::path::PathBuf;

use thiserror::Error;

pub mod args;
pub mod certify;
pub mod config;
pub mod find_orbit;
pub mod output;
pub mod simulate;
pub mod sweep;

pub use args::{Cli, Command};
pub use config::Scenario;

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "PENDULUM_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] pendulum_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot encode output: {0}")]
    Encode(String),
}

impl CliError {
    /// Wraps a core error raised while validating input.
    pub fn usage(e: pendulum_core::Error) -> Self {
        Self::Usage(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Self::Pass => 0,
            Self::Fail => 1,
        }
    }
}

/// Sizes the global rayon pool from `PENDULUM_WORKERS` when it is set.
pub fn init_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{WORKERS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Certify(a) => certify::run(a),
        Command::FindOrbit(a) => find_orbit::run(a),
        Command::Sweep(a) => sweep::run(a),
    }
}
