use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed scan: {len} bytes is not a multiple of 16")]
    MalformedScan { len: usize },

    #[error("malformed labels: {len} bytes is not a multiple of 4")]
    MalformedLabels { len: usize },

    #[error("unknown class id {0}")]
    UnknownClass(u32),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("inconsistent map: {0}")]
    InconsistentMap(String),

    #[error("cloud has no labels")]
    MissingLabels,

    #[error("invalid sector width {0} (must be in (0, 2pi))")]
    InvalidSector(f64),

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("dataflow {dataflow} disagrees with {reference}: max relative deviation {max_dev:e}")]
    EquivalenceFailure {
        dataflow: String,
        reference: String,
        max_dev: f64,
    },

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("TTA variant {variant} failed: {source}")]
    Variant {
        variant: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
