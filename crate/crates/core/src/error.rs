use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the toolkit.
///
/// Variants fall into three families that the CLI maps onto exit codes:
/// configuration problems, data problems, and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("ill-conditioned proxies: {matrix} is singular ({detail})")]
    IllConditioned { matrix: &'static str, detail: String },

    #[error("rank deficiency in {stage}")]
    RankDeficient { stage: String },

    #[error("matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:e} below tolerance for norm {norm:e}")]
    NotPsd { min_eigenvalue: f64, norm: f64 },

    #[error("auto-proxy construction failed at step {step}: {source}")]
    AutoProxy {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient observations: {0}")]
    InsufficientData(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error category, used to pick CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorKind::Data,
            Error::InsufficientData(_) => ErrorKind::Data,
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } => ErrorKind::Data,
            Error::IllConditioned { .. }
            | Error::RankDeficient { .. }
            | Error::NotPsd { .. }
            | Error::AutoProxy { .. } => ErrorKind::Numerical,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
