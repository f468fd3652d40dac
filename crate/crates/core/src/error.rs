//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Child measures of a cube do not add up to the cube's own measure.
    #[error("measure mismatch at cube \"{address}\": children sum to {children_sum}, cube has {expected}")]
    MeasureMismatch {
        address: String,
        children_sum: f64,
        expected: f64,
    },

    #[error("cube \"{address}\" has measure {value}, measures must be positive")]
    NonpositiveMeasure { address: String, value: f64 },

    #[error("cube \"{address}\" has {count} children, offspring bound is {bound}")]
    OffspringBound {
        address: String,
        count: usize,
        bound: usize,
    },

    #[error("tree would have {leaves} leaf cells, configured limit is {limit}")]
    ResourceLimit { leaves: usize, limit: usize },

    #[error("branching must be at least 2, got {0}")]
    BranchingTooSmall(usize),

    #[error("depth must be at least 1, got {0}")]
    DepthTooSmall(usize),

    #[error("root measure must be 1 (unit total mass), got {0}")]
    RootMeasure(f64),

    /// Two operands were built over different trees.
    #[error("operands belong to different trees")]
    MixedTree,

    #[error("{name} = {value} is outside the valid range {range}")]
    ParameterRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// The smoothness order must strictly exceed the fractional order.
    #[error("need 0 < beta < lambda < 1, got beta = {beta}, lambda = {lambda}")]
    ParameterOrder { beta: f64, lambda: f64 },

    #[error("spectrum carries {got} coefficients, the system has {expected} wavelets")]
    SizeMismatch { got: usize, expected: usize },

    #[error("spectrum has nonzero mean component (|mean| = {magnitude:.3e}); project it out first")]
    NonzeroMean { magnitude: f64 },

    /// Eigenvalue data does not cover the system (a wavelet has no eigenvalue).
    #[error("eigenvalue report covers {got} wavelets at order {report_beta}, expected {expected} at order {beta}")]
    EigenMismatch {
        got: usize,
        expected: usize,
        report_beta: f64,
        beta: f64,
    },

    /// The transformed wavelet is not a pointwise multiple of the wavelet itself,
    /// which signals a broken tree or a transform bug.
    #[error("eigenvalue ratio varies by {deviation:.3e} (relative) over the support of wavelet {index}, tolerance {tolerance:.1e}")]
    RatioNotConstant {
        index: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("invalid address \"{address}\": {reason}")]
    InvalidAddress { address: String, reason: String },

    #[error("time grid entry {value} is outside the required range {range}")]
    TimeGridRange { value: f64, range: &'static str },

    #[error("truncation scale {got} exceeds the finest wavelet scale {max}")]
    TruncationScale { got: usize, max: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
