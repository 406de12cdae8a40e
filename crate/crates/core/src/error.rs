use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("non-numeric or non-finite cell at row {row}, column {column}: {cell:?}")]
    BadCell { row: usize, column: usize, cell: String },

    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("not enough admissible neighbours: requested {requested}, available {available}")]
    NotEnoughNeighbors { requested: usize, available: usize },

    #[error("duplicate states {first} and {second}: k-th neighbour distance is zero")]
    DuplicateStates { first: usize, second: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
