use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("material interface at x = {breakpoint} does not fall on a coarse-grid edge (I_0 = {coarse_cells})")]
    MisalignedInterface { breakpoint: f64, coarse_cells: usize },

    #[error("dimension mismatch: expected {expected} cells, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("region [{lower}, {upper}] is not resolvable on the level-{level} grid")]
    Alignment { lower: f64, upper: f64, level: usize },

    #[error("cannot assemble low-order system: {0}")]
    Assembly(String),

    #[error("singular tridiagonal system: zero pivot in row {row}")]
    SingularSystem { row: usize },

    #[error("level {level} has {count} samples; at least 2 are needed")]
    InsufficientSamples { level: usize, count: u64 },

    #[error("rate fit needs at least two usable levels, found {0}")]
    Fit(usize),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_)
            | Error::MisalignedInterface { .. }
            | Error::Parse { .. }
            | Error::Io { .. } => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
