use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories shared by every module of the crate.
///
/// [`Error::is_numerical`] separates bad input from numerical breakdown; the
/// CLI maps the two classes onto distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("too few rows: have {n}, need at least {needed}")]
    TooFewRows { n: usize, needed: usize },

    #[error("io error: {0}")]
    Io(String),

    #[error("unknown weight strategy `{0}`")]
    UnknownStrategy(String),

    #[error("degenerate design: reciprocal condition estimate {rcond:.3e} below 1e-12")]
    DegenerateDesign { rcond: f64 },

    #[error("degenerate curvature: reciprocal condition estimate {rcond:.3e} below 1e-12")]
    DegenerateCurvature { rcond: f64 },

    #[error("bandwidth {h} too small: every kernel window is empty, try --bandwidth cv")]
    BandwidthTooSmall { h: f64 },

    #[error("single index is degenerate: first-step slope vector is zero")]
    IndexDegenerate,

    #[error("weight family returned non-finite or non-positive value {value} at row {row}")]
    WeightFamily { row: usize, value: f64 },

    #[error("no bandwidth among {candidates} candidates has enough evaluable leave-one-out terms; widen the grid")]
    BandwidthGrid { candidates: usize },

    #[error("method `{method}` failed in {failed} of {total} replications")]
    StudyFailed {
        method: String,
        failed: usize,
        total: usize,
    },
}

impl Error {
    /// True for failures caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDesign { .. }
                | Error::DegenerateCurvature { .. }
                | Error::BandwidthTooSmall { .. }
                | Error::IndexDegenerate
                | Error::WeightFamily { .. }
                | Error::BandwidthGrid { .. }
                | Error::StudyFailed { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidWeights(_) => "invalid_weights",
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumeric { .. } => "non_numeric",
            Error::TooFewRows { .. } => "too_few_rows",
            Error::Io(_) => "io",
            Error::UnknownStrategy(_) => "unknown_strategy",
            Error::DegenerateDesign { .. } => "degenerate_design",
            Error::DegenerateCurvature { .. } => "degenerate_curvature",
            Error::BandwidthTooSmall { .. } => "bandwidth_too_small",
            Error::IndexDegenerate => "index_degenerate",
            Error::WeightFamily { .. } => "weight_family",
            Error::BandwidthGrid { .. } => "bandwidth_grid",
            Error::StudyFailed { .. } => "study_failed",
        }
    }
}
