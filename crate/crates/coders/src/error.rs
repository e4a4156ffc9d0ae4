use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by all modules of this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column {col}: cannot parse {value:?} as a response code")]
    BadCell { row: usize, col: usize, value: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("row {row}, column {col}: response {value} outside 0..={max}")]
    OutOfRange { row: usize, col: usize, value: i64, max: u8 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid survey design: {0}")]
    Design(String),

    #[error("no critical value tabulated for alpha={alpha}, d={d}")]
    UntabulatedCriticalValue { alpha: f64, d: usize },

    #[error("training diverged: non-finite loss in epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("study replicate {replicate} (survey seed {seed}) failed: {message}")]
    Study { replicate: usize, seed: u64, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
