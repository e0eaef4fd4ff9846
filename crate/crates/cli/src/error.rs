use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The scene does not parse or violates the schema.
    #[error("config error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: martree::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for failures
    /// inside a construction, 4 for output problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Module { .. } => 3,
            CliError::Io { .. } | CliError::Csv { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a description of the step that failed to a library error.
pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T>;
}

impl<T> Context<T> for martree::Result<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T> {
        self.map_err(|source| CliError::Module {
            context: what.into(),
            source,
        })
    }
}
