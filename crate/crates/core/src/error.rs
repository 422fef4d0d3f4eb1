use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two objects that must agree in size do not.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A parameter lies outside the domain of the density or sampler.
    #[error("domain error: {0}")]
    Domain(String),

    /// An abundance coordinate is on (or beyond) the simplex boundary where
    /// the Dirichlet log-density is undefined.
    #[error("abundance a[{index}] = {value} is not strictly inside the simplex")]
    Boundary { index: usize, value: f64 },

    /// The residual ‖y − g_b(Ma)‖² is exactly zero, so the noise-variance
    /// conditional is improper.
    #[error(
        "residual norm is zero; the noise-variance conditional is degenerate \
         (noiseless data evaluated at the exact parameters)"
    )]
    DegenerateResidual,

    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("line {line}, column {column}: {message}")]
    Validation {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("sampler failed at iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidValue {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Strips `Sampler`/`Run` wrappers and returns the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sampler { source, .. } | Error::Run { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by malformed or invalid input files/config.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::Format { .. }
                | Error::Validation { .. }
                | Error::InvalidValue { .. }
                | Error::UnknownKey(_)
        )
    }
}
