use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("mode {mode} out of range for a {modes}-mode space")]
    InvalidMode { mode: usize, modes: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dense dimension {dim} exceeds the limit {limit}; use a structured path or raise --dense-limit")]
    DenseLimit { dim: usize, limit: usize },

    #[error("structured dimension {dim} exceeds the limit {limit}")]
    StructuredLimit { dim: usize, limit: usize },

    #[error("operator is not Hermitian (max |A - A^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min:e}, max eigenvalue {max:e})")]
    NotPsd { min: f64, max: f64 },

    #[error("dense eigensolver produced a non-finite eigenvalue (block of size {block})")]
    EigenFailure { block: usize },

    #[error("ket has zero norm")]
    ZeroNorm,

    #[error("ket is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("truncation too aggressive: {what} lost {leaked:e} (bound {bound:e}); raise the cutoff")]
    Truncation {
        what: &'static str,
        leaked: f64,
        bound: f64,
    },

    #[error("secular equation did not converge for root {index}: bracket [{lo:e}, {hi:e}] after {iterations} iterations")]
    SecularNonConvergence {
        index: usize,
        lo: f64,
        hi: f64,
        iterations: usize,
    },

    #[error("minimization did not converge: last bracket [{lo}, {hi}]")]
    MinimizerNonConvergence { lo: f64, hi: f64 },

    #[error("POVM is not complete (max |E0 + E1 - I| = {deviation:e})")]
    PovmIncomplete { deviation: f64 },

    #[error("engine `{engine}` cannot evaluate this pair: {reason}")]
    Unsupported { engine: String, reason: String },

    #[error("unknown engine `{0}`")]
    UnknownEngine(String),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by numerics rather than by the caller's input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian { .. }
                | Error::NotPsd { .. }
                | Error::EigenFailure { .. }
                | Error::SecularNonConvergence { .. }
                | Error::MinimizerNonConvergence { .. }
                | Error::Truncation { .. }
                | Error::DenseLimit { .. }
                | Error::StructuredLimit { .. }
        )
    }
}
