use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants map onto the failure classes a caller can act on: bad input,
/// insufficient working precision, geometry that does not match the
/// expected combinatorics, and tuning that failed to converge.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precision budget exceeded: {detail} (try precision_bits >= {suggested_bits})")]
    Precision { detail: String, suggested_bits: u32 },

    #[error("ambiguous comparison at orbit index {index}: {detail}; more bits required")]
    Resolution { index: usize, detail: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("tuning failed after {steps} bisection steps: best bracket [{lo}, {hi}]")]
    Tuning { steps: usize, lo: String, hi: String },

    #[error("depth exceeded: requested {requested}, available {available}")]
    DepthExceeded { requested: usize, available: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable tag, used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidFamily(_) => "invalid_family",
            Error::Domain(_) => "domain",
            Error::Precision { .. } => "precision",
            Error::Resolution { .. } => "resolution",
            Error::Geometry(_) => "geometry",
            Error::Tuning { .. } => "tuning",
            Error::DepthExceeded { .. } => "depth_exceeded",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
