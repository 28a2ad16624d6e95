use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate variance in `{0}`")]
    DegenerateVariance(&'static str),

    #[error("coefficient of variation undefined: mean is zero")]
    UndefinedCv,

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("unbalanced matching pools: {males} males vs {females} females (deficit of {deficit} {short_side})")]
    UnbalancedPools {
        males: usize,
        females: usize,
        deficit: usize,
        short_side: &'static str,
    },

    #[error("unknown education label {label:?}{}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    UnknownLabel { label: String, row: Option<usize> },

    #[error("{path}: line {line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("duplicate key {0:?}")]
    DuplicateKey(String),

    #[error("unknown region ids: {0:?}")]
    UnknownRegions(Vec<String>),

    #[error("registry invariant violated: {0}")]
    Registry(String),

    #[error("rank-deficient design; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("invalid regression spec: {0}")]
    InvalidSpec(String),

    #[error("missing or stale inputs: {}", .0.join("; "))]
    MissingInputs(Vec<String>),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, spec, parameters),
    /// as opposed to data or runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidSpec(_) | Error::NonFinite(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
