use std::fmt;
use std::path::PathBuf;

/// Exit code for invalid input data, flags or artifacts.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code for unreadable or unwritable files.
pub const EXIT_IO: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Core(contextspace_core::Error),
    Io { path: PathBuf, source: std::io::Error },
    MissingArtifact(PathBuf),
    BadArtifact { path: PathBuf, message: String },
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_io() => EXIT_IO,
            CliError::Io { .. } | CliError::MissingArtifact(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::MissingArtifact(path) => write!(f, "missing artifact {}", path.display()),
            CliError::BadArtifact { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<contextspace_core::Error> for CliError {
    fn from(e: contextspace_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
