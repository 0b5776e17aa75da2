use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` needs the outputs of `{missing}`; run `lexnet run {missing}` first")]
    MissingPrerequisite { stage: String, missing: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("requested {requested} components but the data has rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("{0} is undefined for this input")]
    Undefined(&'static str),

    #[error("optimisation diverged: {0}")]
    Diverged(String),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("singular matrix")]
    Singular,

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MissingPrerequisite { .. } => 2,
            _ => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
