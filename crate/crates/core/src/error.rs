use thiserror::Error;

/// Errors raised by the fitting, evidence and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("response is constant; cannot standardize")]
    ConstantResponse,

    #[error("design matrix is numerically rank deficient")]
    SingularDesign,

    #[error("not enough degrees of freedom: {rows} rows for {params} parameters")]
    DegenerateDof { rows: usize, params: usize },

    #[error("residual sum of squares is zero; empirical prior undefined")]
    DegeneratePrior,

    #[error("evidence quadratic form is non-positive (xi/2 + 1/theta = {0})")]
    NonPositiveXi(f64),

    #[error("input contains non-finite values")]
    NonFiniteInput,

    #[error("no active dictionary terms remain")]
    EmptyActiveSet,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory diverged at step {step}")]
    NonFiniteState { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
