use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] acfair::Error),

    #[error("cell (sweep value {value}, seed {seed}): {source}")]
    Cell {
        value: String,
        seed: u64,
        #[source]
        source: acfair::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("test split changed during the run (before {before}, after {after})")]
    TestSplitModified { before: String, after: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
