use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The physical preconditions of an operation are not met.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A discretisation did not converge or produced inconsistent output.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("ambiguous channel tracking between rho = {rho_lo:e} and rho = {rho_hi:e}: {detail}")]
    Tracking {
        rho_lo: f64,
        rho_hi: f64,
        detail: String,
    },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
