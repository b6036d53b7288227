use std::io;

use thiserror::Error;

use crate::solvers::ConvergenceReport;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),

    #[error("singular triangle: zero diagonal at row {row}")]
    SingularTriangle { row: usize },

    #[error("singular matrix: zero pivot at column {col}")]
    SingularMatrix { col: usize },

    #[error("ILU(0) zero pivot at row {row}")]
    ZeroPivot { row: usize },

    #[error("band LU would need {required} bytes, above the cap of {cap} bytes")]
    Capacity { required: u64, cap: u64 },

    #[error("rank-deficient input: column {col} is linearly dependent on earlier columns")]
    RankDeficient { col: usize },

    #[error("Cholesky factorization failed on axis {axis}")]
    Cholesky { axis: usize },

    #[error("wave-number rejection limit hit after {attempts} consecutive rejections")]
    RejectionLimit { attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("Krylov breakdown in {solver}: {reason}")]
    Breakdown {
        solver: &'static str,
        reason: String,
        partial: Box<ConvergenceReport>,
    },

    #[error("preconditioner '{0}' is nonlinear; enable the flexible flag to use it inside a Krylov method")]
    NonlinearPreconditioner(String),

    #[error("weights error: {0}")]
    Weights(String),

    #[error("container format error: {0}")]
    Format(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
