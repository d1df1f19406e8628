use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("non-physical matrix: minimum eigenvalue {0:.3e}")]
    NotPhysical(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("missing setting: {0}")]
    MissingSetting(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("metric `{metric}` failed: {source}")]
    Metric {
        metric: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input (config, files, arguments)
    /// as opposed to a failing analysis.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::UnknownChannel(_) | Error::MissingSetting(_) => true,
            Error::Metric { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
