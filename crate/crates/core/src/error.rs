use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("enumeration of {hypotheses} hypotheses exceeds the limit of {limit}")]
    TooLarge { hypotheses: u128, limit: u128 },

    #[error("metric row has no present entries")]
    EmptyRow,

    #[error("insufficient samples for moment fit: {0}")]
    InsufficientSamples(String),

    #[error("non-convex metric profile (curvature {0:e})")]
    NonConvexFit(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("model format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
