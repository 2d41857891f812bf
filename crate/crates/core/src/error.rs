use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    /// Incompatible layer shapes; `layer` is 1-based.
    #[error("shape error in layer {layer}: {msg}")]
    Shape { layer: usize, msg: String },

    /// Non-finite weight or bias; `layer` is 1-based.
    #[error("value error in layer {layer}: {msg}")]
    Value { layer: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("problem too large for exhaustive search: {vars} free variables, cap is {cap}")]
    TooManyVariables { vars: usize, cap: usize },

    /// Brute-force enumeration refused; carries the cap that would be needed.
    #[error("brute force needs {hidden} hidden units enumerated, cap is {cap} (rerun with cap >= {hidden})")]
    OverCap { hidden: usize, cap: usize },

    #[error("remote solver error: {0}")]
    Remote(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
