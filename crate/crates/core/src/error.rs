use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EwsError {
    #[error("degenerate denominator: conj(lambda_i) + lambda_j = 0 for blocks {0} and {1}")]
    DegenerateDenominator(usize, usize),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("direction has no projection on the leading block (silenced sign)")]
    Silenced,
    #[error("series window too short: need {need} samples, have {have}")]
    WindowTooShort { need: usize, have: usize },
    #[error("zero denominator in autocorrelation")]
    ZeroDenominator,
    #[error("newton did not converge after {iters} iterations (residual {residual:e})")]
    NewtonFailed { iters: usize, residual: f64 },
    #[error("fold reached near p = {0}")]
    FoldReached(f64),
    #[error("step size underflow at p = {0}")]
    StepUnderflow(f64),
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("non-finite state encountered at step {0}")]
    BlowUp(usize),
    #[error("dimension {n} exceeds dense cap {cap}")]
    CapExceeded { n: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, EwsError>;
