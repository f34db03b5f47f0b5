use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the crate. CLI subcommands map every variant to
/// exit code 2; argument problems are reported separately as usage errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("input contains no interactions")]
    EmptyInput,

    #[error("invalid interaction matrix: {0}")]
    InvalidMatrix(String),

    #[error("all rows are empty; moments are undefined")]
    AllRowsEmpty,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank deficient: only {achieved} of {requested} requested eigenvalues lie above the tolerance threshold")]
    RankDeficient { achieved: usize, requested: usize },

    #[error("eigensolver did not converge within {max_iter} matrix-vector products (residual {residual:.3e}, required {required:.3e})")]
    NoConvergence {
        max_iter: usize,
        residual: f64,
        required: f64,
    },

    #[error("eigenvalue {index} is not positive ({value:.6e}); whitening is undefined")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("tensor is not permutation-symmetric (max deviation {0:.3e})")]
    AsymmetricTensor(f64),

    #[error("tensor component {index} is degenerate: best candidate eigenvalue {lambda:.3e} at or below the deflation floor")]
    DegenerateComponent { index: usize, lambda: f64 },

    #[error("recovered component {index} has non-positive mass after clipping")]
    DegenerateTopic { index: usize },

    #[error("unknown user '{key}'")]
    UnknownUser { key: String },

    #[error("model file: {0}")]
    MalformedModel(String),

    #[error("unsupported model format '{0}'")]
    UnsupportedVersion(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter '{field}': {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("{op}: {source}")]
    Io {
        op: String,
        #[source]
        source: std::io::Error,
    },

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(op: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            op: op.into(),
            source,
        }
    }

    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
