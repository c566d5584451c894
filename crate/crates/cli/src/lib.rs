//! Command-line front end: configuration, run orchestration, artifact
//! writing and the verification suites.

use std::path::Path;

pub mod commands;
pub mod config;
pub mod plot;
pub mod snapshot;
pub mod trace_io;
pub mod verify;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    CheckFailed(String),
    #[error("blowup detected: {0}")]
    Blowup(String),
    #[error("corrupt input: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] euler_lab::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 0 ok, 1 check failure, 2 usage, 3 blowup detected, 4 corrupt input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Core(euler_lab::Error::BlowupDetected { .. }) | CliError::Blowup(_) => 3,
            CliError::Core(_) => 2,
            CliError::Corrupt(_) => 4,
        }
    }
}

/// Cap rayon's worker count from `EULER_LAB_THREADS` if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("EULER_LAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("EULER_LAB_THREADS must be a positive integer, got `{v}`")))?;
    // A pool already built (tests, repeated calls) keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
