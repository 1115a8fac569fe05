use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration; exit code 1.
    #[error("invalid configuration: {0}")]
    Validation(String),

    /// Failure while running; exit code 2.
    #[error("runtime error: {0}")]
    Runtime(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn field(field: &str, msg: String) -> Self {
        Self::Validation(format!("{field}: {msg}"))
    }

    pub fn runtime(err: ista_core::error::Error) -> Self {
        Self::Runtime(err.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) | Self::Output { .. } => 2,
        }
    }
}
