use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QError {
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("infinite product (a|q)_inf diverges at q = 1 for a = {a}")]
    InfiniteProductAtQ1 { a: f64 },

    #[error("slow convergence: {0}")]
    SlowConvergence(String),

    #[error("operation is undefined at q = 1")]
    Q1Unsupported,

    #[error("point {x} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { x: f64, lo: f64, hi: f64 },

    #[error("degenerate denominator {value:e} in closed form")]
    DegenerateDenominator { value: f64 },

    #[error("ill-conditioned system (condition estimate {cond:e})")]
    IllConditioned { cond: f64 },

    #[error("singular linear system (condition estimate {cond:e})")]
    SingularSystem { cond: f64 },

    #[error("bad index set: {0}")]
    BadIndexSet(String),

    #[error("function is not centered: constant coefficient {a0}")]
    NonCenteredFunction { a0: f64 },

    #[error("too many rejections ({count}) in rejection sampler")]
    TooManyRejections { count: u64 },

    #[error("quadrature tolerance not met: value {value}, error estimate {estimate:e}")]
    ToleranceNotMet { value: f64, estimate: f64 },
}

impl QError {
    /// True for errors caused by the numerics giving up rather than bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            QError::SlowConvergence(_) | QError::ToleranceNotMet { .. } | QError::TooManyRejections { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, QError>;
