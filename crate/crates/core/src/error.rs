use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("partition has no groups")]
    EmptyPartition,
    #[error("group {group} has size zero")]
    ZeroGroupSize { group: usize },
    #[error("column {column} appears in more than one group")]
    OverlappingGroups { column: usize },
    #[error("groups do not cover column {column} of {p}")]
    NonCoveringGroups { column: usize, p: usize },
    #[error("column index {column} out of range for p = {p}")]
    ColumnOutOfRange { column: usize, p: usize },
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("column {column} has norm {norm}, expected unit norm")]
    NonUnitColumn { column: usize, norm: f64 },
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("block coherence needs at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("{groups} groups exceed the exhaustive coherence limit of {limit}; opt in explicitly")]
    ExhaustiveLimit { groups: usize, limit: usize },
    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    PowerIteration { iterations: usize, estimate: f64 },
    #[error("support size {s} outside [0, {groups}]")]
    InvalidSupportSize { s: usize, groups: usize },
    #[error("invalid magnitude {value} for group {group}")]
    InvalidMagnitude { group: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("support sub-dictionary is rank deficient (smallest singular value {sigma_min})")]
    RankDeficient { sigma_min: f64 },
    #[error("event E4 requires a primal-dual certificate")]
    MissingCertificate,
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
