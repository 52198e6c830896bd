use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed JSON; `offset` is the byte offset into the input.
    #[error("malformed JSON at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("no valid event records ({rejected} rejected); first problem: {first}")]
    NoValidRecords { rejected: usize, first: String },

    #[error("event #{seq} ({activity}) has no `{key}` attribute")]
    MissingCaseKey {
        seq: usize,
        activity: String,
        key: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(
        "zero-probability event: {token:?} after context {context:?}; \
         enable smoothing to score unseen n-grams"
    )]
    ZeroProbability {
        context: Vec<String>,
        token: String,
    },

    /// Input data that cannot support the requested analysis.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("activity map: {0}")]
    ActivityMap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
