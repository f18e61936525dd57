use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .path.display())]
    FileNotFound { path: PathBuf },

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: no records", .path.display())]
    NoRecords { path: PathBuf },

    #[error("{}: line {line}: malformed row: {reason}", .path.display())]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("duplicate id `{id}`")]
    DuplicateId { id: String },

    #[error("`{id}`: {field} must be positive, got {value}")]
    NonPositive {
        id: String,
        field: &'static str,
        value: f64,
    },

    #[error("line {line}: ragged row, expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("cell ({row}, {column}) is not numeric: `{value}`")]
    NonNumericCell {
        row: String,
        column: String,
        value: String,
    },

    #[error("missing cells: {}", format_cells(.cells))]
    MissingCells { cells: Vec<(String, String)> },

    #[error("`{model}`: overall {overall} deviates from category mean {mean:.4} by more than 0.05")]
    InconsistentOverall {
        model: String,
        overall: f64,
        mean: f64,
    },

    #[error("unknown topic for metric `{metric}` in sidecar")]
    UnknownMetric { metric: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("constant input: correlation is undefined")]
    ConstantInput,

    #[error("|r| = 1: t statistic is infinite")]
    PerfectCorrelation,

    #[error("key sets differ: {0}")]
    KeySetMismatch(String),

    #[error("`{0}` is missing from one of the inputs")]
    MissingModel(String),

    #[error("size group {group} has no reference model")]
    MissingReference { group: String },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("missing feature `{0}`")]
    MissingFeature(String),

    #[error("missing category `{0}`")]
    MissingCategory(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite gradient at batch {batch}")]
    NonFiniteGradient { batch: usize },

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_cells(cells: &[(String, String)]) -> String {
    cells
        .iter()
        .map(|(r, c)| format!("({r}, {c})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::FileNotFound { .. } | Error::Io { .. } => ErrorKind::Io,
            Error::Csv(e) if e.is_io_error() => ErrorKind::Io,
            Error::NonFinite(_) | Error::NonFiniteGradient { .. } | Error::NotConverged(_) => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Validation,
        }
    }

    /// `FileNotFound` for a missing path, `Io` otherwise.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound { path }
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
