//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("outcome bounds violation: {0}")]
    BoundsViolation(String),
    #[error("empty support: {0}")]
    EmptySupport(String),
    #[error("non-unique row keys after collapse: {0}")]
    NonUniqueAfterCollapse(String),
    #[error("invalid fold count: {0}")]
    InvalidFoldCount(String),
    #[error("singular design matrix: {0}")]
    SingularDesign(String),
    #[error("feature arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("empty risk set: {0}")]
    EmptyRiskSet(String),
    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),
    #[error("enumeration size exceeds the configured cap: {0}")]
    IntractableSupport(String),
    #[error("sample mismatch: {0}")]
    SampleMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach the recursion stage at which an error occurred.
    pub fn at_stage(self, stage: usize) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}
