use std::path::PathBuf;

use kslab::config::ConfigError;
use kslab::dynamics::DynamicsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 1,
            HarnessError::Runtime(_) | HarnessError::Io { .. } => 2,
            HarnessError::Verification(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Validation(e.to_string())
    }
}

impl From<DynamicsError> for HarnessError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Config(_) | DynamicsError::Init(_) => HarnessError::Validation(e.to_string()),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}
