//! Error types shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration invariants were violated. Every
    /// violation is collected before reporting.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    /// A quantity left its mathematical domain (e.g. non-positive
    /// distance in a path-loss evaluation).
    #[error("domain error: {0}")]
    Domain(String),

    /// Fields defined on different grids were combined.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A caller-side contract was violated (e.g. non-unit beamformer).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The effective channel matrix is too ill-conditioned for
    /// zero-forcing.
    #[error("singular effective channel (condition number {cond:.3e}); \
             consider a larger swarm or different phase initialization")]
    SingularChannel { cond: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}
