use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix: zero pivot at column {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("ill-conditioned system: condition estimate {cond:e}")]
    IllConditioned { cond: f64 },

    #[error("degenerate LOOCV indicator: inverse diagonal vanishes at index {index}")]
    DegenerateIndicator { index: usize },

    #[error("point budget exhausted: {requested} points requested, cap is {cap} ({} flagged)", flagged.len())]
    BudgetExhausted {
        requested: usize,
        cap: usize,
        flagged: Vec<usize>,
    },

    #[error("Newton iteration failed at t = {t}, step {step:e}, residual {residual:e}")]
    StiffFailure { t: f64, step: f64, residual: f64 },

    #[error("non-finite state at t = {t}")]
    BlowUp { t: f64 },

    #[error("non-finite nodal values at t = {t}")]
    NumericOverflow { t: f64 },

    #[error("fast LOOCV indicator disagrees with brute force: relative deviation {deviation:e}")]
    OracleMismatch { deviation: f64 },

    #[error("refinement iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_iteration(self, iter: usize) -> Self {
        Error::AtIteration {
            iter,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }

    /// The innermost error, with iteration/level context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } | Error::AtLevel { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
