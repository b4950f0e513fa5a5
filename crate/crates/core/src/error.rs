use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the layoutforge library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layout has {count} components, at most {max} are supported")]
    TooManyComponents { count: usize, max: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("timestep {t} out of range 1..={max}")]
    Timestep { t: usize, max: usize },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("component index {index} out of range for layout with {len} components")]
    ComponentIndex { index: usize, len: usize },

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("weights error: {0}")]
    Weights(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image encoding failed: {0}")]
    Image(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Dotted path of the offending key for a `serde_path_to_error` failure. Unknown keys may
/// and missing keys always are reported at their parent; the key name is then appended.
/// The document root is the empty string.
pub(crate) fn field_path(path: &str, message: &str) -> String {
    let base = if path == "." { "" } else { path };
    let key = ["unknown field `", "missing field `"]
        .iter()
        .find_map(|prefix| message.strip_prefix(prefix))
        .and_then(|rest| rest.split('`').next());
    match key {
        Some(key) if base == key || base.ends_with(&format!(".{key}")) => base.to_string(),
        Some(key) if base.is_empty() => key.to_string(),
        Some(key) => format!("{base}.{key}"),
        None => base.to_string(),
    }
}
