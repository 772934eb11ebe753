//! Acceptance gate for code assets: a merged script is only admitted if an
//! external checker accepts it.

use std::fs;
use std::process::Command;

use super::{AssetBlob, AssetError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationOutcome {
    Pass,
    /// Rejected, with the checker's combined output.
    Fail(String),
}

/// External checker invoked as `<cmd...> <blob-path>`; exit status 0 passes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeValidator {
    command: Vec<String>,
}

impl CodeValidator {
    pub fn new(command: Vec<String>) -> Result<Self, AssetError> {
        if command.is_empty() {
            return Err(AssetError::EmptyCommand);
        }
        Ok(CodeValidator { command })
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    pub fn check(&self, blob: &AssetBlob) -> Result<ValidationOutcome, AssetError> {
        validate_code_asset(blob, self)
    }
}

/// Writes the blob under its own file name in a scratch directory and runs
/// the validator on it.
pub fn validate_code_asset(blob: &AssetBlob, validator: &CodeValidator) -> Result<ValidationOutcome, AssetError> {
    let dir = tempfile::tempdir()?;
    let name = blob
        .id
        .as_str()
        .rsplit(['/', '\\'])
        .find(|s| !s.is_empty() && *s != "." && *s != "..")
        .unwrap_or("asset");
    let path = dir.path().join(name);
    fs::write(&path, &blob.content)?;

    let command = validator.command();
    let output = Command::new(&command[0])
        .args(&command[1..])
        .arg(&path)
        .output()
        .map_err(|source| AssetError::CommandUnavailable {
            command: command[0].clone(),
            source,
        })?;
    if output.status.success() {
        return Ok(ValidationOutcome::Pass);
    }
    let mut message = String::from_utf8_lossy(&output.stderr).into_owned();
    message.push_str(&String::from_utf8_lossy(&output.stdout));
    if message.trim().is_empty() {
        message = format!("validator exited with {}", output.status);
    }
    Ok(ValidationOutcome::Fail(message.trim_end().to_owned()))
}
