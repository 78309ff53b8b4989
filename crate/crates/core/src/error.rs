use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The requested structure cannot be built (e.g. dense sketch with m not dividing n).
    #[error("structural error: {0}")]
    Structure(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Sketch parameters derived from accuracy targets exceed the source dimension.
    #[error("infeasible sketch parameters: {0}")]
    Infeasible(String),

    /// The public parameters put the randomizer into its all-zeros branch.
    #[error("threshold regime: {0}")]
    ThresholdRegime(String),

    /// A client input violates the declared entry bound.
    #[error("input out of bound: {0}")]
    InputBound(String),

    /// A value cannot be represented in the fixed-point ring without wrapping.
    #[error("fixed-point range violation: {0}")]
    Range(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("wire format error: {0}")]
    Wire(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Short stable tag used in machine-greppable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Structure(_) => "structure",
            Error::Shape(_) => "shape",
            Error::Infeasible(_) => "infeasible",
            Error::ThresholdRegime(_) => "threshold-regime",
            Error::InputBound(_) => "input-bound",
            Error::Range(_) => "range",
            Error::Data(_) => "data",
            Error::Wire(_) => "wire",
            Error::Internal(_) => "internal",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
