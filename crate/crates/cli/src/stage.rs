//! Stage-attributed errors: every failure names the pipeline stage it
//! came from and is printed as one machine-readable JSON line.

use std::fmt;

#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl StageError {
    pub fn new(stage: &'static str, message: impl fmt::Display) -> StageError {
        StageError { stage, message: message.to_string() }
    }

    /// The machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "stage": self.stage, "error": self.message }).to_string()
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

/// Shorthand for mapping a module error into a stage.
pub fn at<E: fmt::Display>(stage: &'static str) -> impl Fn(E) -> StageError {
    move |e| StageError::new(stage, e)
}
