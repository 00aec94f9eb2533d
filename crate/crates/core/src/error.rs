use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-positive pivot {pivot:e} at column {column}; matrix is not positive definite")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("dense oracle limited to n <= {limit}, got n = {n}")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("edge ({p}, {q}) is already in the subgraph")]
    EdgeInSubgraph { p: usize, q: usize },

    #[error("singular system: {0}")]
    Singular(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
