use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("record {record}: block ({x},{y}) extent {w}x{h} exceeds {width}x{height} grid")]
    OutOfBounds {
        record: usize,
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("record {record}: frame index {frame} not below frame count {frame_count}")]
    FrameOutOfRange {
        record: usize,
        frame: usize,
        frame_count: usize,
    },

    #[error(
        "record {record}: block extent {w}x{h} is not a legal partition (each side 1, 2 or 4)"
    )]
    InvalidExtent { record: usize, w: usize, h: usize },

    #[error("record {record} overlaps an earlier record at cell ({x},{y}) in frame {frame}")]
    Overlap {
        record: usize,
        frame: usize,
        x: usize,
        y: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("bad header: {0}")]
    Header(String),

    #[error("expected {expected} data entries, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid label set: {0}")]
    InvalidLabels(String),

    #[error("malformed flow network: {0}")]
    MalformedNetwork(String),

    #[error("pairwise term is not a metric: {0}")]
    NonMetricPairwise(String),

    #[error("circular mean is undefined: resultant length {0:e} below 1e-9")]
    DegenerateMean(f64),

    #[error("no coarse segment is larger than the size threshold {0}")]
    NoQualifyingSegments(usize),

    #[error("scene primitives {first} and {second} overlap")]
    PrimitiveOverlap { first: usize, second: usize },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("brute-force search space of {0} labelings exceeds 1e7")]
    TooLarge(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed input or configuration, as opposed
    /// to failures while running the pipeline.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NonMetricPairwise(_) | Error::DegenerateMean(_) | Error::TooLarge(_)
        )
    }
}
