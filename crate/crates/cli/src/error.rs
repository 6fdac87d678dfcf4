use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing configuration, model file or argument.
    #[error("config error: {0}")]
    Config(String),
    /// One or more checks failed; the message lists them.
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] pas_core::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for failed
    /// invariants, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Core(e) => match e {
                pas_core::Error::Config(_)
                | pas_core::Error::Domain(_)
                | pas_core::Error::Format(_)
                | pas_core::Error::Io(_) => 2,
                _ => 1,
            },
            CliError::Output { .. } => 1,
        }
    }
}
