use std::path::PathBuf;

use flapper_core::Error as CoreError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Self::Format { path: path.into(), msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Format { .. } | Self::Input(_) => EXIT_INPUT,
            Self::Numerical(_) => EXIT_NUMERICAL,
            Self::Core(e) => {
                if is_numerical(e) {
                    EXIT_NUMERICAL
                } else {
                    EXIT_INPUT
                }
            }
        }
    }
}

/// Failures of the numerics rather than of the inputs.
fn is_numerical(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::Singular
            | CoreError::NotStabilizable
            | CoreError::NotDetectable
            | CoreError::ImaginaryAxisEigenvalue { .. }
            | CoreError::NoConvergence { .. }
            | CoreError::NotHurwitz { .. }
            | CoreError::NonFinite
            | CoreError::GimbalLock { .. }
    )
}

pub type AppResult<T> = Result<T, AppError>;
