use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by model evaluation, data generation, and estimation.
#[derive(Error, Debug)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The structural system has no unique equilibrium (alpha0 == beta0).
    #[error("singular model: {0}")]
    SingularModel(String),

    /// A numeric evaluation produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A quotient or denominator vanished where a finite value was required.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// The instrument matrix does not have full column rank.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// Too few observations for the requested fit.
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// An input collection was empty.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A configuration value violates a documented invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A serialized dataset could not be parsed.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Mismatched dimensions between related inputs.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
