use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input: wrong dimension, nonpositive parameter, bad label.
    #[error("argument error: {0}")]
    Argument(String),

    /// The objective or configuration lacks something the operation needs.
    #[error("capability error: {0}")]
    Capability(String),

    /// Input at which the operation is singular.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An inner solve stopped short of its tolerance.
    #[error("subsolver failure in {context}: residual {residual:.3e} after {iterations} iterations")]
    Subsolver {
        context: String,
        residual: f64,
        iterations: usize,
    },

    /// The acceleration line search could not produce an admissible pair.
    #[error("line search failure: {0}")]
    LineSearch(String),

    /// Invalid experiment or method configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Step failure tagged with the iteration where it happened.
    #[error("iteration {k}: {source}")]
    AtIteration {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn at(self, k: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                k,
                source: Box::new(e),
            },
        }
    }

    /// Strips iteration annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for configuration and argument problems, as opposed to solver failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self.root(),
            Error::Config(_) | Error::Argument(_) | Error::Json(_) | Error::Capability(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::arg(format!(
            "{what}: dimension {got} does not match {want}"
        )));
    }
    Ok(())
}
