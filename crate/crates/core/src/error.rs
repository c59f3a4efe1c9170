use thiserror::Error;

/// Errors produced by the imaging, reconstruction and I/O layers.
#[derive(Debug, Error)]
pub enum AspiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("mask has no positive energy")]
    EmptyMask,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "probe ({x}, {y}) has coverage {coverage:.6} below floor {floor:.6} at section {section}"
    )]
    Coverage {
        x: usize,
        y: usize,
        section: usize,
        coverage: f64,
        floor: f64,
    },

    #[error("out of range: {0}")]
    Range(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("metadata error: {0}")]
    Metadata(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AspiError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        AspiError::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(expected: (usize, usize), actual: (usize, usize)) -> Self {
        AspiError::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            actual: format!("{}x{}", actual.0, actual.1),
        }
    }

    /// True for errors caused by bad caller input rather than runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, AspiError::InvalidArgument(_) | AspiError::Range(_))
    }
}

pub type Result<T> = std::result::Result<T, AspiError>;
