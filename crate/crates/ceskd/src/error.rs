use std::io;
use std::path::PathBuf;

/// Everything the command line and the file formats can fail with.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    /// Malformed binary or text input. `offset` is a byte offset for binary
    /// formats and a 1-based line number for text tables.
    #[error("{file}: {detail} (at {unit} {offset})")]
    Parse {
        file: String,
        unit: &'static str,
        offset: usize,
        detail: String,
    },

    #[error("{file}: format version {found}, this build reads version {expected}")]
    Version { file: String, found: u32, expected: u32 },

    #[error("{file}: payload checksum mismatch (stored {stored}, computed {computed})")]
    Checksum { file: String, stored: String, computed: String },

    #[error("{file}: checkpoint holds depth {found}, the configuration expects {expected}")]
    DepthMismatch { file: String, expected: u32, found: u32 },

    #[error("config{}: {detail}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, detail: String },

    #[error("missing {what} at {}; run `ceskd {command}` first", path.display())]
    MissingArtifact { what: &'static str, path: PathBuf, command: &'static str },

    #[error(transparent)]
    Core(#[from] ceskd_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn bytes(file: &str, offset: usize, detail: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            unit: "byte",
            offset,
            detail: detail.into(),
        }
    }

    pub(crate) fn line(file: &str, line: usize, detail: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            unit: "line",
            offset: line,
            detail: detail.into(),
        }
    }

    pub fn config(detail: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            detail: detail.into(),
        }
    }
}

pub(crate) fn read(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
