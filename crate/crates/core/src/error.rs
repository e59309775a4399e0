use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown transform `{0}`")]
    UnknownTransform(String),

    #[error("crop {crop_h}x{crop_w} does not fit in a {height}x{width} image")]
    CropTooLarge {
        crop_h: usize,
        crop_w: usize,
        height: usize,
        width: usize,
    },

    #[error("{transform} does not support {channels} channel(s)")]
    UnsupportedChannels { transform: String, channels: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Usage(String),

    #[error("subset size {requested} exceeds set size {available}")]
    SubsetTooLarge { requested: usize, available: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("target {value} is not binary")]
    NonBinaryTarget { value: f64 },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite loss (augmentation {l_augm}, task {l_task})")]
    NonFiniteLoss { l_augm: f64, l_task: f64 },

    #[error("backbone `{0}` is not available in the built-in CPU backend")]
    UnsupportedBackbone(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("metrics incomplete: missing label `{0}`")]
    MissingLabel(String),

    #[error("catalog mapping mismatch: checkpoint has {found:?}, current catalog is {expected:?}")]
    MappingMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("checkpoint integrity check failed: {0}")]
    Integrity(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("checksum mismatch for {path}: expected {expected}, got {actual}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("dataset `{name}` not found under {root}")]
    MissingDataset { name: String, root: PathBuf },

    #[error("corrupt data in {path}: {reason}")]
    CorruptData { path: PathBuf, reason: String },

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("invalid config:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("run `{0}` not found in registry")]
    UnknownRun(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("figure rendering failed: {0}")]
    Plot(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
