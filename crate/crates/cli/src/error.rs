use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    BadArtifact { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] tdalign_core::Error),
    #[error("identity check failed: {0}")]
    IdentityViolation(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit status: 1 for usage, config and I/O problems, 2 for
    /// numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::IdentityViolation(_) => 2,
            CliError::Core(tdalign_core::Error::NonFinite { .. } | tdalign_core::Error::NonFiniteLoss { .. }) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
