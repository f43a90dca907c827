use std::path::PathBuf;

use uplift_core::Error as CoreError;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[source] CoreError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("experiment failed: {0}")]
    Experiment(String),
}

impl BenchError {
    /// 1 usage/config, 2 data, 3 experiment or output failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) | BenchError::Config(_) => 1,
            BenchError::Data(_) => 2,
            BenchError::Output { .. } | BenchError::Experiment(_) => 3,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Output {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for BenchError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io { .. }
            | CoreError::MissingColumn(_)
            | CoreError::Schema(_)
            | CoreError::Parse { .. }
            | CoreError::Csv(_)
            | CoreError::NonBinary(_)
            | CoreError::EmptyArm(_)
            | CoreError::UndersizedStratum { .. } => BenchError::Data(e),
            other => BenchError::Experiment(other.to_string()),
        }
    }
}
