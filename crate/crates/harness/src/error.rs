use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),

    #[error("{}:{line}: {reason}", path.display())]
    ParseError {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{}:{line}: expected {expected} fields, found {found}", path.display())]
    RaggedRows {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{}:{line}: negative entry {value} in column {column}", path.display())]
    NegativeEntry {
        path: PathBuf,
        line: usize,
        column: usize,
        value: f64,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] mdlnmf_core::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

impl HarnessError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            context: context.into(),
            source,
        }
    }

    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use mdlnmf_core::Error as E;
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::ParseError { .. }
            | HarnessError::RaggedRows { .. }
            | HarnessError::NegativeEntry { .. }
            | HarnessError::MissingInput(_)
            | HarnessError::Io { .. } => 2,
            HarnessError::Core(e) => match e {
                E::InvalidConfig(_) | E::InfeasibleTarget { .. } => 1,
                E::EmptyMatrix
                | E::NegativeEntry { .. }
                | E::NonFiniteEntry { .. }
                | E::ShapeMismatch { .. } => 2,
                _ => 3,
            },
        }
    }
}
