use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate channel: column {0} is all zero")]
    DegenerateChannel(usize),

    #[error("degenerate matrix: cannot map an all-zero matrix onto conductances")]
    DegenerateMatrix,

    #[error("singular system: {0}")]
    Singular(&'static str),

    #[error("calibration infeasible: required feedback product {product:.6e} S^2 is {bound}")]
    Calibration { product: f64, bound: &'static str },

    #[error("conductance {value:.6e} S outside [{min:.6e}, {max:.6e}] S")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("value {0} is not a constellation point")]
    NotAConstellationPoint(String),

    #[error("comparator word {0:?} is not a thermometer code")]
    InvalidSelect(Vec<u8>),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
