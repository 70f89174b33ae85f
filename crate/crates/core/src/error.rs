use std::path::PathBuf;

/// Errors raised by the grid, estimator, construction, and solver layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("non-finite value {value} at node ({i}, {j})")]
    NonFinite { i: usize, j: usize, value: f64 },

    #[error("offset ({0}, {1}) out of range for grid resolution {2}")]
    OffsetOutOfRange(i64, i64, usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("geometry rejected: {0}")]
    Geometry(String),

    #[error("infeasible level count {requested}; at most {max_feasible} levels fit")]
    InfeasibleLevels { requested: usize, max_feasible: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed grid file: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
