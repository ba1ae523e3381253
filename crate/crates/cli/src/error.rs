use thiserror::Error;

/// Process exit statuses.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ABORTED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", config_message(*.line, .message))]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Numerical(#[from] bohmchaos::Error),

    #[error("run dominated by aborted or escaping orbits: {0}")]
    Aborted(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn config_message(line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("config line {l}: {message}"),
        None => format!("config: {message}"),
    }
}

impl CliError {
    pub fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        CliError::Config {
            line,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Numerical(bohmchaos::Error::InvalidParameter(_)) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
            CliError::Aborted(_) => EXIT_ABORTED,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numerical(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
