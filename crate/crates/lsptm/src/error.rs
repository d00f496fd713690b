use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed PPM: {reason}")]
    Ppm { path: PathBuf, reason: String },
    #[error("{path}: frame is {found:?} (h, w), clip started at {expected:?}")]
    InconsistentResolution {
        path: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{path}:{line}: {reason}")]
    Manifest { path: PathBuf, line: usize, reason: String },
    #[error("duplicate clip id `{0}`")]
    DuplicateId(String),
    #[error("{path}: not a checkpoint (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: checkpoint payload truncated: need {expected} bytes, found {found}")]
    Truncated { path: PathBuf, expected: u64, found: u64 },
    #[error("{path}: tensor `{name}` has shape {found:?}, backbone expects {expected:?}")]
    ShapeMismatch {
        path: PathBuf,
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint holds a `{found}` backbone, run expects `{expected}`")]
    BackboneMismatch { expected: String, found: String },
    #[error("{path}: corrupt checkpoint header: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("invalid JSON in {what}: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] lsptm_core::Error),
}

impl Error {
    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> Self {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    pub fn json(what: impl Into<String>) -> impl FnOnce(serde_json::Error) -> Self {
        let what = what.into();
        move |source| Error::Json { what, source }
    }

    /// Process exit status: 1 for runtime failures, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::Core(lsptm_core::Error::Diverged { .. }) => 1,
            _ => 2,
        }
    }
}
