use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid grid shape: {0}")]
    InvalidShape(String),

    #[error("trajectory coordinate out of range: point {index}, axis {axis}, value {value}")]
    TrajectoryOutOfRange { index: usize, axis: usize, value: f64 },

    #[error("wavelet transform needs every dimension divisible by 2^{levels}, got {dims:?}")]
    WaveletDims { dims: Vec<usize>, levels: usize },

    #[error("negative or non-finite density weight at sample {0}")]
    InvalidWeight(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sketched operator requires identical density weights on every coil")]
    PerCoilWeights,

    #[error("step sizes violate sigma * tau * |K|^2 <= 1 (product {0})")]
    StepSizeBound(f64),

    #[error("zero reference in {0}")]
    ZeroReference(&'static str),

    #[error("optimisation diverged at outer iteration {iteration}: objective {objective:.3e} > 10x initial {initial:.3e}")]
    Diverged {
        iteration: usize,
        objective: f64,
        initial: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("array format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn dims(what: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            got,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
