use dgmm_core::Error as CoreError;

/// Failure classes reported on stderr as `error: class=<Class> message=<...>`.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    DimensionMismatch(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::DimensionMismatch(_) => "DimensionMismatch",
            CliError::Io(_) => "IoError",
            CliError::Numerical(_) => "NumericalError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::DimensionMismatch(_) => 3,
            CliError::Io(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }

    /// One line, message quoted with inner quotes and newlines escaped.
    pub fn render(&self) -> String {
        let msg = self.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
        format!("error: class={} message=\"{msg}\"", self.class())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidConfig(_) | CoreError::DegenerateFolds { .. } => CliError::Config(msg),
            CoreError::ShapeMismatch { .. } => CliError::DimensionMismatch(msg),
            // a data file disagreeing with its own manifest is a bad file
            CoreError::ShapeMismatchWithManifest { .. }
            | CoreError::Io(_)
            | CoreError::Csv(_)
            | CoreError::MissingFile(_)
            | CoreError::Parse { .. }
            | CoreError::NonFiniteEntry { .. } => CliError::Io(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
