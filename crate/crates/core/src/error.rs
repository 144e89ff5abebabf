use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An afterpulse model produced an invalid per-slot probability or total.
    #[error("invalid afterpulse model: {0}")]
    Model(String),

    #[error("series did not converge within {terms} terms")]
    Convergence { terms: u64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("tag stream is not strictly increasing at index {index}")]
    NonMonotonic { index: usize },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }
}

/// Errors raised while decoding one of the on-disk formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected \"TTG1\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported tag file version {0}")]
    UnsupportedVersion(u16),

    #[error("tick resolution must be non-zero")]
    ZeroResolution,

    #[error("reserved header bytes are not zero")]
    ReservedNonZero,

    #[error("truncated file: {len} bytes ({detail})")]
    Truncated { len: u64, detail: &'static str },

    #[error("tick at byte offset {byte_offset} does not exceed its predecessor")]
    NonMonotonic { byte_offset: u64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("report schema version {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },

    #[error("report field {0} is not finite")]
    NonFinite(String),

    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
}
