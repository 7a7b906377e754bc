use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transport error: {0}")]
    Transport(String),

    /// The provider refused the request for quota or billing reasons. Kept
    /// apart from [`Error::Transport`] so a harness can pause instead of
    /// retrying.
    #[error("quota exhausted: {0}")]
    Quota(String),

    #[error("unparseable reply: {0:?}")]
    UnparseableReply(String),

    #[error("decomposition produced no atoms")]
    EmptyDecomposition,

    #[error("reply carries no usable label log-probabilities")]
    MissingLogprobs,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("duplicate variable for id `{0}`")]
    DuplicateVariable(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Inference(#[from] factreason_pgm::Error),

    #[error("{stage} failed{}: {source}", if .ids.is_empty() { String::new() } else { format!(" for {}", .ids.join(", ")) })]
    Stage {
        stage: &'static str,
        ids: Vec<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str, ids: &[&str]) -> Self {
        Error::Stage {
            stage,
            ids: ids.iter().map(|s| s.to_string()).collect(),
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
