use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("kendall tau {tau} is unreachable for {family} (reachable range {range})")]
    UnreachableTau {
        family: String,
        tau: f64,
        range: String,
    },

    #[error("{0} copula has no Lebesgue density")]
    NoDensity(String),

    #[error("numeric failure: {0}")]
    Convergence(String),

    #[error("invalid vine structure: {0}")]
    Structure(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("grid too large: {0}")]
    Size(String),

    #[error("model evaluation failed: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
