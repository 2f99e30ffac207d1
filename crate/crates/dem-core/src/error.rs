//! Error type shared by the whole crate.

use std::fmt;

/// Errors produced by simulation setup, stepping, and I/O.
#[derive(Debug)]
pub enum DemError {
    /// Invalid configuration, scene parameters, or state construction.
    Config(String),
    /// A non-finite quantity or tunneled particle was detected while stepping.
    Explosion {
        step: u64,
        particle: u64,
        detail: String,
    },
    /// Filesystem failure, with the path that caused it.
    Io { path: String, source: std::io::Error },
    /// Malformed or truncated snapshot file.
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, DemError>;

impl DemError {
    pub fn config(msg: impl Into<String>) -> Self {
        DemError::Config(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DemError::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 2 config, 3 explosion, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            DemError::Config(_) | DemError::Snapshot(_) => 2,
            DemError::Explosion { .. } => 3,
            DemError::Io { .. } => 4,
        }
    }
}

impl fmt::Display for DemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemError::Config(msg) => write!(f, "configuration error: {msg}"),
            DemError::Explosion { step, particle, detail } => write!(
                f,
                "numerical explosion at step {step}, particle {particle}: {detail}"
            ),
            DemError::Io { path, source } => write!(f, "i/o error on {path}: {source}"),
            DemError::Snapshot(msg) => write!(f, "snapshot error: {msg}"),
        }
    }
}

impl std::error::Error for DemError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            DemError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
