use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("enumeration of {subsets} subsets exceeds the budget of {budget}; pass explicit supports instead")]
    EnumerationBudget { subsets: u128, budget: u128 },

    #[error("step-size rule violated: {0}")]
    StepSize(String),

    #[error("initial value has infinite penalty")]
    InfeasibleStart,

    #[error("non-finite value at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("penalty mismatch: {0}")]
    PenaltyMismatch(String),

    #[error("point is not optimal: residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotOptimal { residual: f64, tolerance: f64 },

    #[error("certificate unavailable: {0}")]
    Certificate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
