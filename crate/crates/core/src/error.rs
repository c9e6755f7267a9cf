use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("could not bracket the root of t -> lambda(t) - 1 for n = {n} (lowest t tried {lowest_t})")]
    BracketFailure { n: u64, lowest_t: f64 },

    #[error("word of length {depth} exceeds the depth cap {cap}")]
    DepthOverflow { depth: usize, cap: usize },

    #[error("stale dimension: measure exponent {h} gives conformal defect {defect:e} (tolerance {tol:e})")]
    StaleDimension { h: f64, defect: f64, tol: f64 },

    #[error("degenerate interval [{lo}, {hi}] has zero diameter")]
    DegenerateInterval { lo: f64, hi: f64 },

    #[error("candidate budget {budget} exceeded ({produced} intervals produced before stopping)")]
    BudgetExceeded { budget: usize, produced: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
