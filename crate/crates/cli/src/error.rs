use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: &'static str,
    pub reason: String,
}

impl FieldError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {}", describe(.0))]
    Config(Vec<FieldError>),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("resource guard: {0}")]
    Resource(String),
    #[error(transparent)]
    Core(#[from] sawtooth::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn describe(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}: {}", e.field, e.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

impl CliError {
    pub fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Self::Config(vec![FieldError::new(field, reason)])
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Invariant(_) => 3,
            Self::Resource(_) => 4,
            Self::Core(sawtooth::Error::InvalidParameter { .. }) => 2,
            Self::Core(_) => 3,
            Self::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Invariant(_) => "invariant",
            Self::Resource(_) => "resource",
            Self::Core(_) => "computation",
            Self::Io(_) => "io",
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> String {
        let fields = match self {
            Self::Config(errors) => errors.clone(),
            _ => Vec::new(),
        };
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
            "fields": fields,
        })
        .to_string()
    }
}
