use std::fmt;

use relaxbias_core::{ErrorCategory, WorkflowError};

/// Any failure the CLI reports, with the category that picks the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub category: ErrorCategory,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { category: ErrorCategory::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { category: ErrorCategory::Data, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.category)
    }
}

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Convergence => 4,
        ErrorCategory::Sampling => 5,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.category.name(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<WorkflowError> for CliError {
    fn from(e: WorkflowError) -> Self {
        CliError { category: e.category(), message: e.to_string() }
    }
}
