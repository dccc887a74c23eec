use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters: unknown band, non-positive fading parameter,
    /// malformed config file and so on.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation precondition (empty accumulation,
    /// mismatched matrix shapes, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An allocation policy produced an assignment the protocol rejects.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Event probabilities that should partition the sample space do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Too few resolvable points to fit a slope.
    #[error("fit window error: {0}")]
    FitWindow(String),

    /// A requested level is not crossed by the data.
    #[error("range error: {0}")]
    Range(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
