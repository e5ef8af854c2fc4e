use std::path::PathBuf;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit 2.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Exit 1: a probative check failed. `counterexample` names the replay file.
    #[error("verification failed: {summary}")]
    Verification {
        summary: String,
        counterexample: Option<PathBuf>,
    },

    /// Exit 3.
    #[error("{context}: {source}")]
    Core {
        context: String,
        source: caulk_core::Error,
    },

    /// Exit 3.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Exit 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(key: &str, message: String) -> Self {
        CliError::Config {
            key: key.to_string(),
            message,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification { .. } => 1,
            CliError::Config { .. } => 2,
            CliError::Core { .. } | CliError::Io { .. } | CliError::Runtime(_) => 3,
        }
    }
}

/// Attaches context to core errors. Invalid arguments become config errors
/// naming `key`, everything else is a runtime failure.
pub trait CoreContext<T> {
    fn context(self, key: &str) -> Result<T, CliError>;
}

impl<T> CoreContext<T> for caulk_core::Result<T> {
    fn context(self, key: &str) -> Result<T, CliError> {
        self.map_err(|e| match e {
            caulk_core::Error::InvalidArgument { name, reason } => CliError::Config {
                key: format!("{key}.{name}"),
                message: reason,
            },
            caulk_core::Error::InvalidLayer { .. } | caulk_core::Error::LayerRange { .. } => {
                CliError::Config {
                    key: key.to_string(),
                    message: e.to_string(),
                }
            }
            other => CliError::Core {
                context: key.to_string(),
                source: other,
            },
        })
    }
}
