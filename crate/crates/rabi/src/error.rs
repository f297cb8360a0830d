use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("`{key}`: cannot parse {value:?}")]
    BadValue { key: &'static str, value: String },
    #[error("`{key}` is required by mode {mode}")]
    MissingKey { key: &'static str, mode: &'static str },
    #[error("`{key}` {reason}")]
    OutOfRange { key: &'static str, reason: &'static str },
    #[error("config says mode {config} but {cli} was requested")]
    ModeMismatch { config: String, cli: String },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Syntax { .. } => "config.syntax",
            ConfigError::UnknownKey { .. } => "config.unknown_key",
            ConfigError::DuplicateKey { .. } => "config.duplicate_key",
            ConfigError::BadValue { .. } => "config.bad_value",
            ConfigError::MissingKey { .. } => "config.missing_key",
            ConfigError::OutOfRange { .. } => "config.out_of_range",
            ConfigError::ModeMismatch { .. } => "config.mode_mismatch",
        }
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing header line `# {0} = ...`")]
    MissingHeader(String),
    #[error("malformed {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] rabi_core::Error),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Model(#[from] rabi_core::Error),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl RunError {
    pub fn code(&self) -> &'static str {
        use rabi_core::Error as E;
        match self {
            RunError::Config(c) => c.code(),
            RunError::Io { .. } => "io",
            RunError::Format { .. } => "format",
            RunError::Threads(_) => "threads",
            RunError::Model(m) => match m {
                E::InvalidParameter { .. } | E::NonPositiveStep(_) | E::OstensibleTooLarge(_) | E::ZeroOstensibleRate => {
                    "model.invalid_parameter"
                }
                E::PositivityViolation { .. } => "model.positivity",
                E::ImpossibleRecord => "model.impossible_record",
                E::InvalidRecord(_) => "model.invalid_record",
                E::OddNodeCount(_) => "model.odd_node_count",
                E::DarkCountsUnsupported => "model.dark_counts_unsupported",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Model(_) => 3,
            _ => 4,
        }
    }

    /// One line: `error code=<code> message="<text>"`.
    pub fn to_line(&self) -> String {
        let msg = self.to_string().replace('\n', " ").replace('"', "'");
        format!("error code={} message=\"{}\"", self.code(), msg)
    }
}
