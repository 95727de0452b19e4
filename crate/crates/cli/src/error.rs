use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Capacity(String),
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Library(#[from] holomera::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Check(_) => 4,
            CliError::Library(e) => match e {
                holomera::Error::Capacity(_) => 3,
                holomera::Error::Parameter(_)
                | holomera::Error::InvalidCoordinate { .. }
                | holomera::Error::DuplicateInsertion { .. } => 2,
                _ => 4,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "capacity",
            _ => "numerical",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}
