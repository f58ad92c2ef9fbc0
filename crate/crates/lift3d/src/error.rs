use thiserror::Error;

/// Crate-wide error type. Every variant carries enough context to print a
/// single actionable line; [`Error::code`] gives a stable machine-readable
/// tag for CLI consumers.
#[derive(Debug, Error)]
pub enum Error {
    /// Pooled 2D spread too small to standardize (all landmarks coincide,
    /// or u and v are each constant).
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    /// A vector or matrix had the wrong length for the operation.
    #[error("length mismatch in {context}: expected {expected}, got {got}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Dataset samples disagree on the number of landmarks.
    #[error("heterogeneous landmark count: {0}")]
    HeterogeneousLandmarkCount(String),

    #[error("empty dataset")]
    EmptyDataset,

    /// Input has missing landmarks but the model was trained without an
    /// imputation stage.
    #[error("input has missing landmarks but the model has no imputer")]
    MissingWithoutImputer,

    /// Model and input disagree on the number of landmarks.
    #[error("landmark count mismatch: model expects n={model}, input has n={input}")]
    LandmarkCountMismatch { model: usize, input: usize },

    /// A synthetic-family specification is unusable (zero samples, n too
    /// small, inverted ranges, ...).
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Structured-text parse failure; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    /// A type-level invariant was violated (non-finite coordinate, too few
    /// observed landmarks, bad lambda weights, ...).
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("unsupported format version: {0}")]
    FormatVersionMismatch(String),

    /// File failed its checksum or is structurally truncated.
    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-parseable code, used by the CLI's single-line error
    /// output and mapped to distinct exit codes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateShape(_) => "E_DEGENERATE",
            Error::LengthMismatch { .. } => "E_LENGTH",
            Error::HeterogeneousLandmarkCount(_) => "E_HETEROGENEOUS",
            Error::EmptyDataset => "E_EMPTY",
            Error::MissingWithoutImputer => "E_MISSING_NO_IMPUTER",
            Error::LandmarkCountMismatch { .. } => "E_LANDMARK_COUNT",
            Error::InvalidSpec(_) => "E_SPEC",
            Error::InvalidConfig(_) => "E_CONFIG",
            Error::ParseError { .. } => "E_PARSE",
            Error::InvariantViolation(_) => "E_INVARIANT",
            Error::FormatVersionMismatch(_) => "E_VERSION",
            Error::CorruptFile(_) => "E_CORRUPT",
            Error::Io(_) => "E_IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
