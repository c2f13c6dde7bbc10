use std::path::PathBuf;

use thiserror::Error;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Validation,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("row {row}, column {column} ({name}): {message}")]
    Cell {
        row: usize,
        column: usize,
        name: String,
        message: String,
    },

    #[error("duplicate series name {name:?} in column {column}")]
    DuplicateSeries { name: String, column: usize },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("window length {window} out of range: need 1 < L <= T/2 with T = {len}")]
    InvalidWindow { window: usize, len: usize },

    #[error("{what} index {index} out of range 1..={bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("series {series:?} has zero mean over the base range")]
    ZeroBaseMean { series: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("group spec, at byte {position}: {message}")]
    GroupSyntax { position: usize, message: String },

    #[error("invalid grouping: {0}")]
    Grouping(String),

    #[error("overlapping groups on (k, m) pairs: {}", format_pairs(.pairs))]
    OverlappingGroups { pairs: Vec<(usize, usize)> },

    #[error("recipe: {0}")]
    Recipe(String),

    #[error(
        "frequency block {frequency}: eigenvalue {value:e} is below -1e-6 * trace ({scale:e})"
    )]
    NegativeEigenvalue {
        frequency: usize,
        value: f64,
        scale: f64,
    },

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs
        .iter()
        .map(|(k, m)| format!("({k}, {m})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::NegativeEigenvalue { .. } | Error::Consistency(_) | Error::Degenerate(_) => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
