use thiserror::Error;

/// Errors produced by every module of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An algebraically real result carried an imaginary residue above tolerance.
    #[error("numeric inconsistency: {0}")]
    NumericInconsistency(String),

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdNonConvergence { rows: usize, cols: usize },

    #[error("postselection impossible: outcome probability {probability:e} is below 1e-14")]
    PostselectionImpossible { probability: f64 },

    #[error("frontal slice {slice} is zero but carries amplitude weight {weight:e}")]
    ZeroSlice { slice: usize, weight: f64 },

    #[error("every frontal slice was truncated to zero for user {user}")]
    EmptyRecommendation { user: usize },

    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),

    #[error("register `{register}` is entangled with the rest of the state (purity {purity})")]
    RegisterEntangled { register: String, purity: f64 },

    #[error("layout needs {requested} qubits but the cap is {cap}; {hint}")]
    QubitCapExceeded {
        requested: usize,
        cap: usize,
        hint: String,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
