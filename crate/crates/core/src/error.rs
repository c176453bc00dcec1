use std::path::PathBuf;

use crate::sigsim::ModulationFormat;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("signal has zero power")]
    ZeroSignal,

    #[error("unsupported resampling ratio {num}/{den} samples per symbol (need at least 2)")]
    UnsupportedRatio { num: u32, den: u32 },

    #[error("equalizer diverged at pass {pass}, position {position}")]
    Diverged { pass: usize, position: usize },

    #[error("OSNR {osnr_db} dB is outside the grid [{min}, {max}] dB")]
    OutOfGrid { osnr_db: f64, min: f64, max: f64 },

    #[error("format {0} is not in the configured class list")]
    UnknownFormat(ModulationFormat),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("partition is empty")]
    EmptyPartition,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("pipeline failed for {format} at {osnr_db} dB, frame {frame}")]
    Pipeline {
        format: ModulationFormat,
        osnr_db: f64,
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training failed for seed index {seed_index}")]
    Seed {
        seed_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep cell {value} ({kind}) failed")]
    SweepCell {
        value: f64,
        kind: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
