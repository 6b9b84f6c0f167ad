use std::path::PathBuf;

use csfpv_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("validation failed: {}", .0.join(", "))]
    ValidationFailed(Vec<String>),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 validation failure, 2 bad input, 3 solver failure, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                CoreError::Config(_)
                | CoreError::Format { .. }
                | CoreError::InvalidParameter { .. }
                | CoreError::UnsupportedScenario { .. }
                | CoreError::UnknownFigure(_) => 2,
                CoreError::Domain { .. }
                | CoreError::Range { .. }
                | CoreError::Unsupported { .. }
                | CoreError::ShuntClosed { .. }
                | CoreError::Singularity { .. }
                | CoreError::OutOfRegime { .. }
                | CoreError::InsufficientData(_)
                | CoreError::RankDeficient(_) => 3,
            },
        }
    }
}
