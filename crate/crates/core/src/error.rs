use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("{}: I/O error: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: unsupported image format: {reason}", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("{}: corrupt image stream: {reason}", path.display())]
    CorruptStream { path: PathBuf, reason: String },

    #[error("{}: failed to encode image: {reason}", path.display())]
    Encode { path: PathBuf, reason: String },

    #[error("real-valued image must be converted to 8-bit before saving")]
    RealSamplesNotSavable,

    #[error("operation requires an 8-bit image")]
    RequiresInteger,

    #[error("image is entirely background at threshold {threshold}")]
    FullyBackground { threshold: f64 },

    #[error("image {width}x{height} does not fit into target {target_width}x{target_height}")]
    Oversize {
        width: usize,
        height: usize,
        target_width: usize,
        target_height: usize,
    },

    #[error("image dimensions {width}x{height} must both be even for quadrant tiling")]
    OddDimensions { width: usize, height: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid resample spec: {0}")]
    InvalidSpec(String),

    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    SmallerThanWindow {
        width: usize,
        height: usize,
        window: usize,
    },

    #[error("invalid SSIM parameters: {0}")]
    InvalidSsimParams(String),

    #[error("{}: row {row}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("label {0} is outside 0..=4")]
    LabelOutOfRange(i64),

    #[error("{}: row {row}: label {label} is outside 0..=4", path.display())]
    LabelOutOfRangeAt {
        path: PathBuf,
        row: usize,
        label: i64,
    },

    #[error("duplicate record id {id:?} ({source_tag})")]
    DuplicateId { id: String, source_tag: String },

    #[error(
        "class {class} has {count} records, too few to populate train, validation and test splits"
    )]
    ClassTooSmall { class: u8, count: usize },

    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),

    #[error("external image missing for record {stem:?} in {}", dir.display())]
    ExternalMissing { stem: String, dir: PathBuf },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("length mismatch: {actual} actual labels vs {predicted} predicted labels")]
    LengthMismatch { actual: usize, predicted: usize },

    #[error("{}: CSV error: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
