use thiserror::Error;

/// Errors raised across the estimation, simulation and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("weak first stage: |t| = {t_stat:.3} below floor {floor}")]
    WeakFirstStage { t_stat: f64, floor: f64 },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    #[error("insufficient sample at horizon {horizon}: {available} usable rows, need {needed}")]
    InsufficientSample {
        horizon: usize,
        available: usize,
        needed: usize,
    },

    #[error("missing variable `{0}`")]
    MissingVariable(String),

    #[error("duplicate series name `{0}`")]
    DuplicateName(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("unknown transform code {code} for series `{series}`")]
    UnknownTcode { series: String, code: i64 },

    #[error("degenerate column: {0}")]
    DegenerateColumn(String),

    #[error("factor VAR is not stationary (spectral radius {spectral_radius:.6})")]
    NonStationary { spectral_radius: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
