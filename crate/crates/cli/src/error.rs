use std::path::PathBuf;

use thiserror::Error;

/// Input errors: anything that stops a scenario from being built.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] polydisc_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
