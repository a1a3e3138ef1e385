use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("COLA violation: zero synthesis normalization at sample {sample}")]
    ColaViolation { sample: usize },

    #[error("invalid STFT configuration: {0}")]
    InvalidStft(String),

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("zero-energy {0}")]
    ZeroEnergy(&'static str),

    #[error("empty signal: {0}")]
    Empty(&'static str),

    #[error("unsupported WAV {path}: {reason}")]
    WavFormat { path: PathBuf, reason: String },

    #[error("WAV i/o on {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("unachievable T60 {t60} s: absorption coefficient {alpha:.4} >= 1")]
    UnachievableT60 { t60: f64, alpha: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid room: {0}")]
    InvalidRoom(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("non-finite value in {0}")]
    NonFiniteValue(String),

    #[error("non-finite loss on clip {clip}: ri={ri} mag={mag} ssisnr={ssisnr}")]
    NonFiniteLoss {
        clip: String,
        ri: f64,
        mag: f64,
        ssisnr: f64,
    },

    #[error("ERLE undefined in double-talk")]
    ErleUndefined,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("clip {index}: {source}")]
    Clip {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("missing clips: {0:?}")]
    MissingClips(Vec<String>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
