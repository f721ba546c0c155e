use std::fmt;
use std::process::ExitCode;

use breathsim::dataset::DatasetError;
use breathsim::eval::EvalError;
use breathsim::io::IoError;
use breathsim::ml::MlError;

/// Failure categories, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or parameters (exit 2).
    Usage(String),
    /// Files that cannot be read or written (exit 3).
    Io(String),
    /// Malformed input data (exit 4).
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Data(_) => 4,
        })
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(self, path: &std::path::Path) -> Self {
        let at = |m: String| format!("{}: {m}", path.display());
        match self {
            CliError::Usage(m) => CliError::Usage(at(m)),
            CliError::Io(m) => CliError::Io(at(m)),
            CliError::Data(m) => CliError::Data(at(m)),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(e) => CliError::Io(e.to_string()),
            e @ IoError::Format { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<MlError> for CliError {
    fn from(e: MlError) -> Self {
        match e {
            MlError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Waveform(_) | DatasetError::Channel(_) | DatasetError::EmptyRequest => {
                CliError::Usage(e.to_string())
            }
            DatasetError::Features(_) => CliError::Data(e.to_string()),
            DatasetError::Ml(e) => e.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Ml(e) => e.into(),
            EvalError::Dataset(e) => e.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}
