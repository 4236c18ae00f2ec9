use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("emitters {i} and {j} coincide (k·r = {kr:.3e})")]
    DegenerateGeometry { i: usize, j: usize, kr: f64 },

    #[error("invalid couplings: {0}")]
    InvalidCouplings(String),

    #[error("system of {requested} emitters exceeds the {method} capacity of {cap}")]
    Capacity {
        method: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("step size underflow at t = {t} (last accepted step)")]
    StepSizeUnderflow { t: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("threshold crossing not reached within the series (t_max = {t_max})")]
    NotReached { t_max: f64 },

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{} of {total} samples failed (indices {failed:?}); first failure: {first}", failed.len())]
    PartialResult {
        total: usize,
        failed: Vec<usize>,
        first: Box<Error>,
    },

    #[error("sweep point {coords}: {source}")]
    SweepPoint {
        coords: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::StepSizeUnderflow { .. } | Error::NumericalBlowup { .. } => true,
            Error::Sample { source, .. } | Error::SweepPoint { source, .. } => {
                source.is_numerical()
            }
            Error::PartialResult { first, .. } => first.is_numerical(),
            _ => false,
        }
    }
}
