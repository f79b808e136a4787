use thiserror::Error;

/// Errors raised by the simulation, reconstruction and certification layers.
///
/// Variants are grouped by how a caller (the CLI in particular) should react:
/// invalid input, a violated physical/model constraint, or a numerical
/// optimizer that did not deliver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {got} out of range [{min}, {max}]")]
    DimensionOutOfRange { got: usize, min: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace {trace} deviates from 1")]
    BadTrace { trace: f64 },

    #[error("state is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("process is not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pulse timing violation: {0}")]
    PulseTiming(String),

    #[error("channel error: {0}")]
    Channel(String),

    #[error("schedule infeasible: {0}")]
    Infeasible(String),

    #[error("schedule has {} violation(s): {}", .0.len(), .0.join("; "))]
    InvalidSchedule(Vec<String>),

    #[error("measurement set is rank deficient (rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Broad classification used to map errors onto process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DimensionOutOfRange { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::InvalidParameter { .. }
            | Error::Serialization(_) => ErrorKind::Input,
            Error::Optimizer(_) => ErrorKind::Optimizer,
            _ => ErrorKind::Model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Model,
    Optimizer,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
