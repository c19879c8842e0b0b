use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid window [{xmin}, {xmax}]: xmin must be strictly below xmax")]
    InvalidWindow { xmin: i64, xmax: i64 },

    #[error("site {site} outside window [{xmin}, {xmax}]")]
    SiteOutsideWindow { site: i64, xmin: i64, xmax: i64 },

    #[error("window mismatch: [{0}, {1}] vs [{2}, {3}]")]
    WindowMismatch(i64, i64, i64, i64),

    #[error("class id must be >= 1")]
    InvalidClass,

    #[error("unknown tag {0}")]
    UnknownTag(u32),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("site {site} holds {count} particles; exclusion dynamics needs at most one")]
    MultiOccupancy { site: i64, count: String },

    #[error("configuration must be single-class for the general-rate engine")]
    MultiClassUnsupported,

    #[error("total jump rate overflowed the declared bound")]
    RateOverflow,

    #[error("series for {0} does not converge within the term budget")]
    Divergence(&'static str),

    #[error("configurations are not ordered site-wise")]
    NotComparable,

    #[error("negative gap {gap} between particles {index} and {next}")]
    NegativeGap { index: usize, next: usize, gap: i64 },

    #[error("light-cone guard violated in {violations} of {replicas} replicas")]
    LightConeAbort { violations: usize, replicas: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
