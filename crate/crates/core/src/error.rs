use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the core pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("table has no data rows")]
    EmptyTable,

    #[error("feature `{0}` takes a single distinct value and carries no information")]
    DegenerateFeature(String),

    #[error("feature `{feature}`: value `{value}` is not one of the known categories")]
    UnknownCategory { feature: String, value: String },

    #[error("feature index {0} is out of range")]
    InvalidFeature(usize),

    #[error("feature index {0} appears more than once")]
    DuplicateFeature(usize),

    #[error("candidate feature {0} is already in the selected set")]
    AlreadySelected(usize),

    #[error("interaction information over {cells} cells exceeds the oracle cap of {cap}")]
    OracleCapExceeded { cells: u128, cap: u128 },

    #[error("empty {0} partition; adjust the split fraction or add rows")]
    EmptyPartition(&'static str),

    #[error("subspace mismatch: {0}")]
    SubspaceMismatch(String),

    #[error("marginal for `{feature}`: {message}")]
    BadMarginal { feature: String, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the file system rather than of the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv { source, .. } => source.is_io_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
