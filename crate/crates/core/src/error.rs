use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("goal is unreachable from the start node")]
    Unreachable,
    #[error("search exceeded the step limit of {0}")]
    StepLimitExceeded(usize),
    #[error("open list is empty")]
    EmptyOpenList,
    #[error("straight-through argmax needs a strictly positive entry")]
    AllZeroInput,
    #[error("backward needs a scalar loss")]
    NotScalar,
    #[error("tape was already consumed by a backward pass")]
    TapeConsumed,
    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),
    #[error("no passable cell in any corner region")]
    NoValidGoal,
    #[error("a start-sampling band stayed empty after repeated resampling")]
    EmptyBand,
    #[error("chamfer distance needs two non-empty paths")]
    EmptyPath,
    #[error("empty sample")]
    Empty,
    #[error("instance {index}: {source}")]
    Instance { index: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_instance(self, index: usize) -> Self {
        Error::Instance { index, source: Box::new(self) }
    }

    /// The innermost error, skipping instance annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Instance { source, .. } => source.root(),
            other => other,
        }
    }
}
