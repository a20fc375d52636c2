use thiserror::Error;

use crate::queues::Violation;

/// Problems found while reading or validating a network description.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: probability out of range ({value})")]
    ProbabilityOutOfRange { field: String, value: f64 },
    #[error("session {session}: missing entropy entry for subset {{{subset}}}")]
    MissingEntropy { session: String, subset: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Errors raised while deriving constants or stepping a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sigma must be positive")]
    NonPositiveSigma,
    #[error("non-finite supremum while computing beta for session {0}")]
    NonFiniteBeta(String),
    #[error("slot {slot}: {} violation(s), first: {}", violations.len(), violations[0])]
    Violations { slot: u64, violations: Vec<Violation> },
    #[error("trace error: {0}")]
    Trace(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
