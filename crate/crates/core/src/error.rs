use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        module: &'static str,
        name: &'static str,
        reason: String,
    },

    #[error("{module}: non-finite value encountered ({context})")]
    NonFinite { module: &'static str, context: String },

    #[error("levelset: time step {dt:e} exceeds the stability bound {max_dt:e}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("{module}: no convergence after {iterations} iterations (last residual {last:e})")]
    NotConverged {
        module: &'static str,
        iterations: usize,
        last: f64,
        residuals: Vec<f64>,
    },

    #[error("{module}: precondition violated: {inner}")]
    Precondition {
        module: &'static str,
        #[source]
        inner: PreconditionError,
    },

    #[error("config: line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io: malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A named inequality that did not hold.
#[derive(Debug, Error)]
#[error("{inequality} (lhs {lhs:e}, rhs {rhs:e})")]
pub struct PreconditionError {
    pub inequality: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl Error {
    pub(crate) fn invalid(module: &'static str, name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            module,
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn non_finite(module: &'static str, context: impl Into<String>) -> Self {
        Error::NonFinite {
            module,
            context: context.into(),
        }
    }

    /// Name of the module that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidParameter { module, .. }
            | Error::NonFinite { module, .. }
            | Error::NotConverged { module, .. }
            | Error::Precondition { module, .. } => module,
            Error::Cfl { .. } => "levelset",
            Error::Config { .. } => "config",
            Error::Format { .. } | Error::Io(_) => "io",
        }
    }

    /// True for errors produced by a numerical routine (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::NotConverged { .. } | Error::Cfl { .. }
        )
    }
}
