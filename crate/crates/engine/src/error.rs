use stormbench_core::DspError;

use crate::registry::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("illegal state: {0}")]
    IllegalState(String),
    #[error("role conflict: {0}")]
    RoleConflict(String),
    #[error("unknown waveform '{0}'")]
    UnknownWaveform(String),
    #[error("unknown device '{0}'")]
    UnknownDevice(String),
    #[error("unknown run '{0}'")]
    UnknownRun(String),
    #[error("validation failed with {} violation(s)", .0.violations.len())]
    Validation(ValidationReport),
    #[error("incompatible: {0}")]
    Compatibility(String),
    #[error("duplicate waveform '{0}'")]
    Duplicate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("engine loop has shut down")]
    Disconnected,
}

impl EngineError {
    /// Stable machine-readable name of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::IllegalState(_) => "IllegalState",
            EngineError::RoleConflict(_) => "RoleConflict",
            EngineError::UnknownWaveform(_) => "UnknownWaveform",
            EngineError::UnknownDevice(_) => "UnknownDevice",
            EngineError::UnknownRun(_) => "UnknownRun",
            EngineError::Validation(_) => "ValidationReport",
            EngineError::Compatibility(_) => "CompatibilityError",
            EngineError::Duplicate(_) => "DuplicateError",
            EngineError::Parse(_) => "ParseError",
            EngineError::Dsp(_) => "ConfigurationError",
            EngineError::Io(_) => "IoError",
            EngineError::Disconnected => "Disconnected",
        }
    }
}

impl From<serde_json::Error> for EngineError {
    fn from(e: serde_json::Error) -> Self {
        EngineError::Parse(e.to_string())
    }
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;
