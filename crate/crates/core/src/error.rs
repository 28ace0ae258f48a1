use std::path::PathBuf;

use thiserror::Error;

use crate::projection::ProjectionResult;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network entry ({i}, {j}): {reason}")]
    InvalidNetwork { i: usize, j: usize, reason: String },

    #[error("matrix is not a graph Laplacian: {0}")]
    InvalidLaplacian(String),

    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {gap:e}")]
    Asymmetric { i: usize, j: usize, gap: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cannot trace-normalize a matrix with zero trace")]
    ZeroTrace,

    #[error("non-finite entry in input")]
    NonFinite,

    #[error("input not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("query {query:?} outside kernel support: every kernel weight is zero")]
    OutsideSupport { query: Vec<f64> },

    #[error("no feasible bandwidth: every candidate leaves some fold undefined")]
    NoFeasibleBandwidth,

    #[error(
        "projection did not converge after {iterations} iterations (KKT residual {residual:e})"
    )]
    ProjectionNotConverged {
        iterations: usize,
        residual: f64,
        best: Box<ProjectionResult>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Attaches a pipeline stage name to the error.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures of an iterative numerical method, as opposed to bad data.
    pub fn is_convergence(&self) -> bool {
        match self {
            Error::ProjectionNotConverged { .. } => true,
            Error::Stage { source, .. } => source.is_convergence(),
            _ => false,
        }
    }

    /// Process exit code: 2 for convergence failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_convergence() {
            2
        } else {
            1
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
