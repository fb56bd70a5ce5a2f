//! Error taxonomy shared by the library and the CLI.
//!
//! Variants are grouped so the CLI can map them onto its exit-code contract:
//! input/data problems (`InvalidInput`, `Io`, `Lookup`) versus numeric
//! failures (`Domain`, `SingularSystem`, `Numeric`).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape mismatches, non-finite inputs, empty inputs, malformed files.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A latent or hyperparameter value outside its support.
    #[error("domain error: {0}")]
    Domain(String),

    /// A symmetric factorization failed for one response column.
    #[error("singular system in column {column}: {detail}")]
    SingularSystem { column: usize, detail: String },

    /// Any other numeric failure (non-finite intermediate, failed solve).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A named entity (feature, response, predictor) was not found.
    #[error("unknown identifier: {0}")]
    Lookup(String),

    /// Filesystem / CSV layer failures.
    #[error("io error: {0}")]
    Io(String),

    /// A sampler block failed at a specific iteration.
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach the iteration index at which a block error occurred.
    pub fn at_iteration(self, iteration: u64) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// True when the error denotes bad user data rather than a numeric
    /// breakdown; the CLI maps this distinction onto exit codes.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Lookup(_) | Error::Io(_) => true,
            Error::Domain(_) | Error::SingularSystem { .. } | Error::Numeric(_) => false,
            Error::AtIteration { source, .. } => source.is_data_error(),
        }
    }

    /// Short machine-parseable category tag used in CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) | Error::Lookup(_) | Error::Io(_) => "data",
            Error::Domain(_) | Error::SingularSystem { .. } | Error::Numeric(_) => "numeric",
            Error::AtIteration { source, .. } => source.category(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
