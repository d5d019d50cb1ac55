//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by geometry construction, integration, and analysis.
///
/// `Config` carries *all* violations found in a config file, not only the
/// first; the CLI maps variants onto process exit codes (`Domain`,
/// `Precondition`, `Invariant` -> 1, `Config`/`Usage` -> 2, `Io` -> 3).
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs outside an operation's domain (bad dimension, negative scale,
    /// window outside stored data, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition on trajectory data is not met (no blow-up recorded,
    /// too few snapshots, non-singular run handed to a singular-time tool).
    #[error("precondition not met: {0}")]
    Precondition(String),

    /// A monitored mathematical invariant failed during a run.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Config file rejected; every violation is listed.
    #[error("invalid config:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// Command line misuse.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI maps this error onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Precondition(_) | Error::Invariant(_) => 1,
            Error::Config(_) | Error::Usage(_) => 2,
            Error::Io(_) => 3,
        }
    }
}
