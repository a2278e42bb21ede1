//! Front-end error classification.
//!
//! Every failure surfaces as one of two exit codes: configuration or IO
//! problems the user can fix (`1`), and numerical failures inside the
//! analysis, such as a covariance window that is not positive definite (`2`).

use onebit_detect::analysis::AnalysisError;
use onebit_detect::detector::DetectorError;
use onebit_detect::model::ModelError;
use onebit_detect::sim::SimError;

/// A classified front-end failure: the message printed to standard error and
/// the process exit code it maps to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CliError {
    /// Bad arguments, bad configuration, or IO trouble. Exit code 1.
    Validation(String),
    /// The requested computation has no numerical answer. Exit code 2.
    Numerical(String),
}

impl CliError {
    /// Shorthand constructor for validation failures.
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Shorthand constructor for numerical failures.
    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    /// The process exit code this failure maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    /// The message to print on standard error.
    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

impl core::fmt::Display for CliError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for CliError {}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::RejectedCovariance { .. } => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::TargetOutOfRange { .. } => CliError::validation(e.to_string()),
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig { .. } => CliError::validation(e.to_string()),
            SimError::Model(m) => m.into(),
            SimError::Detector(d) => d.into(),
            SimError::Analysis(a) => a.into(),
        }
    }
}
