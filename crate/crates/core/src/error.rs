use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("missing column `{column}` in {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("unmapped category `{category}` in protected column `{column}`")]
    UnmappedCategory { column: String, category: String },

    #[error("column `{column}` is numeric in one file and categorical in another (value `{value}`)")]
    InconsistentColumn { column: String, value: String },

    #[error("dataset `{0}` is empty after cleaning")]
    EmptyDataset(String),

    #[error("dimension mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("schema mismatch between datasets `{0}` and `{1}`")]
    SchemaMismatch(String, String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("need at least 2 datasets, got {0}")]
    TooFewDatasets(usize),

    #[error("invalid kernel parameter: {0}")]
    InvalidKernel(String),

    #[error("gamma must be positive, got {0}")]
    InvalidGamma(f64),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid cluster count k={k} for r={r}")]
    InvalidK { k: usize, r: usize },

    #[error("embedding has only {distinct} distinct rows, cannot form {k} clusters")]
    DegenerateEmbedding { distinct: usize, k: usize },

    #[error("dataset `{0}` not found")]
    UnknownDataset(String),

    #[error("dataset `{0}` has no region in the region map")]
    UnknownRegion(String),

    #[error("dataset `{0}` is not a member of the cluster")]
    NotInCluster(String),

    #[error("undefined DI: majority group {group} has no positive outcomes")]
    UndefinedDisparateImpact { group: usize },

    #[error("group {0} is empty")]
    EmptyGroup(usize),

    #[error("undefined rate: group {group} has no instances of class {class}")]
    UndefinedRate { group: usize, class: u8 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("group {group} has {count} rows; SMOTE needs at least 2")]
    SmoteGroupTooSmall { group: usize, count: usize },

    #[error("training set contains a single class")]
    SingleClass,

    #[error("stratum (group {group}, target {target}) has a single row and cannot be split")]
    StratumTooSmall { group: usize, target: u8 },

    #[error("invalid benchmark spec: {0}")]
    InvalidBenchmark(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
