use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("input has {channels} channels; pass the downmix flag to average them")]
    Channel { channels: u16 },

    #[error("empty output: {0}")]
    EmptyOutput(String),

    #[error("LPC order {order} requires more than {order} samples per frame, got {len}")]
    Order { order: usize, len: usize },

    #[error("degenerate frame: r0 = {0}")]
    DegenerateFrame(f64),

    #[error("unstable filter: {0}")]
    Unstable(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("rate {rate} bits/vector does not exceed log2(I) = {min}")]
    InsufficientRate { rate: f64, min: f64 },

    #[error(
        "target {target} dB is not bracketed by the rate grid: LSD(min) = {lsd_at_min} dB, LSD(max) = {lsd_at_max} dB"
    )]
    NotBracketed {
        target: f64,
        lsd_at_min: f64,
        lsd_at_max: f64,
    },

    #[error("non-monotone mapping: {0}")]
    NonMonotone(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_) | Error::Unstable(_) | Error::DegenerateFrame(_) | Error::NonMonotone(_)
        )
    }
}
