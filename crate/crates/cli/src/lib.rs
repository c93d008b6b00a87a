//! Command implementations behind the `epf` binary.
//!
//! Every command reads an [`ExperimentConfig`], works inside its output
//! directory and returns a [`CliError`] carrying the process exit code on
//! failure.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::fmt;
use std::path::{Path, PathBuf};

use epf_core::EpfError;

pub use commands::{cmd_backtest, cmd_evaluate, cmd_ingest, cmd_report, cmd_select, cmd_synth, cmd_tune};
pub use config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    /// A prerequisite artifact is absent.
    pub fn missing(path: &Path, produced_by: &str) -> Self {
        Self::usage(format!(
            "missing artifact {} (run `epf {produced_by}` first)",
            path.display()
        ))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<EpfError> for CliError {
    fn from(e: EpfError) -> Self {
        let code = match &e {
            EpfError::Schema(_)
            | EpfError::Data(_)
            | EpfError::Csv(_)
            | EpfError::Json(_)
            | EpfError::DimensionMismatch { .. } => EXIT_DATA,
            EpfError::Numerical(_) => EXIT_NUMERICAL,
            EpfError::InvalidArgument(_) | EpfError::UnknownName { .. } | EpfError::Config(_) | EpfError::Io(_) => {
                EXIT_USAGE
            }
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        EpfError::from(e).into()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Resolved settings shared by all commands.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
}

impl Context {
    /// Applies command-line overrides to a loaded config.
    pub fn new(config: ExperimentConfig, seed: Option<u64>, jobs: Option<usize>, out: Option<PathBuf>) -> Self {
        Self {
            seed: seed.unwrap_or(config.seed),
            jobs: jobs.unwrap_or(1).max(1),
            out: out.unwrap_or_else(|| config.out_dir.clone()),
            config,
        }
    }

    pub fn load(path: &Path, seed: Option<u64>, jobs: Option<usize>, out: Option<PathBuf>) -> CliResult<Self> {
        Ok(Self::new(ExperimentConfig::load(path)?, seed, jobs, out))
    }
}
