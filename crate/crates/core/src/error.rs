use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}, column `{column}`: cannot parse `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stratum `{stratum}` has {size} rows, need at least {required}")]
    UndersizedStratum {
        stratum: String,
        size: usize,
        required: usize,
    },
    #[error("cannot rebalance test `{0}`: one arm is empty")]
    Unreachable(String),
    #[error("{0} arm is empty")]
    EmptyArm(&'static str),
    #[error("labels must be binary (0/1), found {0}")]
    NonBinary(f64),
    #[error("singular system in ridge solve; use l2 > 0")]
    Singular,
    #[error("exp overflow in response surface at row {row}")]
    Overflow { row: usize },
    #[error("calibration impossible: {0}")]
    Calibration(String),
    #[error("degenerate propensity {0}; must lie strictly in (0, 1)")]
    DegeneratePropensity(f64),
    #[error("no identification: all residualized treatment weights are below 1e-12")]
    NoIdentification,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("every configuration in the grid failed: {0}")]
    AllInvalid(String),
    #[error("bootstrap failed: {0}")]
    Bootstrap(String),
    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
