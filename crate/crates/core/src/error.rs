use thiserror::Error;

/// Everything that can go wrong in the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix exponential overflowed at t = {t}")]
    Overflow { t: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    Symmetry { asymmetry: f64 },

    #[error("near-singular Gramian (condition estimate {condition:.3e})")]
    NearSingular { condition: f64 },

    #[error("invalid time interval [{t0}, {tf}]")]
    Interval { t0: f64, tf: f64 },

    #[error("time {t} outside [{t0}, {tf}]")]
    Domain { t: f64, t0: f64, tf: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("uncontrollable configuration: {0}")]
    Uncontrollable(String),

    #[error("endpoint miss {miss:.3e} exceeds tolerance {tolerance:.3e}")]
    Consistency { miss: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("fit needs at least 3 points in range, got {0}")]
    InsufficientPoints(usize),

    #[error("power-law fit requires positive data, got {0}")]
    NonPositive(f64),

    #[error("curves are on different grids")]
    GridMismatch,

    #[error("task at value {value:e}, sample {sample} failed: {source}")]
    Task {
        value: f64,
        sample: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        if let Error::Task { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::Overflow { .. }
                | Error::NearSingular { .. }
                | Error::Consistency { .. }
                | Error::Numeric(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
