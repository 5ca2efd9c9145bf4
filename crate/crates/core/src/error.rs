use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the selection, inference and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rank-deficient design: columns {columns:?} are collinear with earlier columns")]
    RankDeficient { columns: Vec<usize> },

    #[error("scenario {scenario}: data still degenerate after {attempts} draws")]
    DegenerateData { scenario: String, attempts: usize },

    #[error("selection event inconsistent with the observed response: {0}")]
    EventInconsistency(String),

    #[error("degenerate selective interval for variable {variable}")]
    DegenerateInterval { variable: usize },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("refusing to resume from {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("schema error in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
