use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signal has {len} samples but one window needs {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("frame length {frame_len} exceeds FFT size {n_fft}")]
    ConfigMismatch { frame_len: usize, n_fft: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative frequency {0} Hz")]
    NegativeFrequency(f64),

    #[error("negative mel value {0}")]
    NegativeMel(f64),

    #[error("invalid frequency range: f_min={f_min} Hz, f_max={f_max} Hz")]
    InvalidRange { f_min: f64, f_max: f64 },

    #[error("score set has no {0} scores")]
    EmptyScores(&'static str),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset contains only {0} utterances")]
    SingleClassDataset(crate::Label),

    #[error("not a RIFF/WAVE file")]
    NotRiff,

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated WAV file: {0}")]
    TruncatedFile(String),

    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("sample rate mismatch: expected {expected} Hz, got {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an I/O failure on `path`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
