//! Error type shared across the crate.
//!
//! Two failure classes matter to callers: validation errors (bad names, bad
//! config fields, malformed files) and model-level errors (a workload that
//! cannot run on the platform at all). The CLI maps them to exit codes 1 and
//! 2 respectively.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model '{0}' (not a builtin; no config file found)")]
    UnknownModel(String),

    #[error("unknown use case '{0}'")]
    UnknownUseCase(String),

    #[error("unknown precision '{0}' (expected fp16, int8, fp8, or int4)")]
    UnknownPrecision(String),

    /// A field-level validation failure; `field` names the offending field.
    #[error("invalid {field}: {reason}")]
    InvalidField { field: String, reason: String },

    /// Config file parse or schema violation, with a field path when known.
    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    /// A parallelism placement the platform or model cannot support.
    #[error("unsupported parallelism: {0}")]
    Placement(String),

    /// Workload does not fit even with the slow tier in play.
    #[error(
        "out of memory: {required_gb:.3} GB required per NPU, \
         {fast_gb:.3} GB fast + {slow_gb:.3} GB slow available"
    )]
    OutOfMemory {
        required_gb: f64,
        fast_gb: f64,
        slow_gb: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Machine-parsable category used in one-line diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::OutOfMemory { .. } | Error::Placement(_) => "model",
            _ => "validation",
        }
    }

    /// CLI exit code: 1 for validation errors, 2 for model-level failures.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "model" => 2,
            _ => 1,
        }
    }
}
