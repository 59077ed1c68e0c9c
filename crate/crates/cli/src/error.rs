use thiserror::Error;

/// Process exit status for each failure class.
pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("config key '{key}': {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Setup(String),

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] dyn_nn_lab::Error),
}

impl CliError {
    pub fn syntax(line: usize, message: &str) -> Self {
        Self::Syntax { line, message: message.to_string() }
    }

    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Self::Config { key: key.to_string(), message: message.into() }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }

    #[cfg(test)]
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::Config { key, .. } => Some(key),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use dyn_nn_lab::Error as E;
        match self {
            Self::Syntax { .. } | Self::Config { .. } | Self::Setup(_) => EXIT_CONFIG,
            Self::Io { .. } => EXIT_IO,
            Self::Core(e) => match e {
                E::Divergence { .. } | E::Evaluation(_) => EXIT_DIVERGENCE,
                _ => EXIT_CONFIG,
            },
        }
    }
}

/// Attaches a key to library errors raised from that key's value.
pub trait KeyContext<T> {
    fn for_key(self, key: &str) -> Result<T, CliError>;
}

impl<T> KeyContext<T> for dyn_nn_lab::Result<T> {
    fn for_key(self, key: &str) -> Result<T, CliError> {
        self.map_err(|e| match e {
            dyn_nn_lab::Error::Divergence { .. } | dyn_nn_lab::Error::Evaluation(_) => CliError::Core(e),
            other => CliError::config(key, other.to_string()),
        })
    }
}
