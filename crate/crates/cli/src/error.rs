use thiserror::Error;
use vit_core::VitError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config document, sidecar or flag combination.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] VitError),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl CliError {
    /// 2 for invalid input, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                VitError::Io(_) => 1,
                VitError::Degenerate(_) => 3,
                e if e.is_numerical() => 3,
                _ => 2,
            },
        }
    }
}
