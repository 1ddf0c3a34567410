//! Experiment orchestration for kslab: configuration files, replica runs,
//! sweeps over `(theta, N)`, run directories and their verification.

pub mod config;
pub mod criteria;
pub mod error;
pub mod persist;
pub mod report;
pub mod run;
pub mod sweep;
pub mod verify;

pub use error::HarnessError;

/// Environment variable that replaces the configured output root.
pub const OUTPUT_ROOT_ENV: &str = "KSLAB_OUTPUT_ROOT";
