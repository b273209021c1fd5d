use std::path::PathBuf;

use crate::domain::Pixel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty domain")]
    EmptyDomain,

    #[error("neighborhood exceeds domain: requested {requested} pixels, {available} available")]
    NeighborhoodExceedsDomain { requested: usize, available: usize },

    #[error("window too small for K: window {window} holds {available} candidates, {requested} requested")]
    WindowTooSmall {
        window: usize,
        requested: usize,
        available: usize,
    },

    #[error("pixel ({}, {}) is not in the domain", .0.u, .0.v)]
    NotInDomain(Pixel),

    #[error("order too high for neighborhood: order {order} needs {coefficients} samples, got {samples}")]
    OrderTooHigh {
        order: usize,
        coefficients: usize,
        samples: usize,
    },

    #[error("degenerate neighborhood")]
    DegenerateNeighborhood,

    #[error("degenerate neighborhood at pixel ({}, {})", .0.u, .0.v)]
    DegenerateAt(Pixel),

    #[error("degenerate pin pixel (index {0})")]
    DegeneratePin(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
