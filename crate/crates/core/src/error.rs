use std::path::PathBuf;

/// Everything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("instances overlap: ({0}) and ({1})")]
    Overlap(String, String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("cannot pack {count} instances of length >= {min_len} into {frames} frames")]
    Packing {
        count: usize,
        min_len: usize,
        frames: usize,
    },
    #[error("clip length {clip_len} exceeds sequence length {frames}")]
    ClipTooLong { clip_len: usize, frames: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("label {label} outside class range 0..={max}")]
    LabelRange { label: usize, max: usize },
    #[error("missing teacher representation: {0}")]
    MissingTeacherRep(String),
    #[error("non-finite gradient in parameter block {0}")]
    NonFiniteGradient(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("frame {0} is not covered by any window")]
    Uncovered(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable identifier used by the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Overlap(..) => "overlap",
            Error::InvalidInstance(_) => "invalid_instance",
            Error::Packing { .. } => "packing",
            Error::ClipTooLong { .. } => "clip_too_long",
            Error::Dimension { .. } => "dimension",
            Error::LabelRange { .. } => "label_range",
            Error::MissingTeacherRep(_) => "missing_teacher",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Uncovered(_) => "uncovered",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
