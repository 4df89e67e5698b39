use std::path::{Path, PathBuf};

/// Failure categories of the lab tools. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] advcausal_core::Error),
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed input file; `location` is a byte offset or a row number.
    #[error("format error in {}: {location}: {msg}", path.display())]
    Format {
        path: PathBuf,
        location: String,
        msg: String,
    },
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, location: impl Into<String>, msg: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            location: location.into(),
            msg: msg.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    /// 2 for usage/config problems, 3 for violated contracts, 4 for files.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Core(_) => 3,
            Self::Io { .. } | Self::Format { .. } => 4,
        }
    }
}

pub(crate) fn read(path: &Path) -> LabResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| LabError::io(path, e))
}

/// Writes `bytes` to `path`; the parent directory must already exist.
pub(crate) fn write(path: &Path, bytes: &[u8]) -> LabResult<()> {
    std::fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> LabResult<()> {
    std::fs::create_dir_all(path).map_err(|e| LabError::io(path, e))
}
