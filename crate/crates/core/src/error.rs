use thiserror::Error;

/// Errors surfaced by channel synthesis, protocol simulation, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate realization: {0}")]
    Degenerate(String),

    #[error("rank-deficient LS system: {0}")]
    RankDeficient(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
