use thiserror::Error;

/// Errors raised by the arithmetic and the constructions built on it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForgeError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("not divisible: valuation {val} is below {need}")]
    NotDivisible { val: u32, need: u32 },
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("element is not a unit")]
    NotAUnit,
    #[error("constant term of the inner series is not topologically nilpotent")]
    ConstantTermNotTopologicallyNilpotent,
    #[error("series is not invertible: {0}")]
    NotInvertible(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("invalid seed: {0}")]
    SeedInvalid(String),
    #[error("integrality violation: {0}")]
    IntegralityViolation(String),
    #[error("torsion points are not pairwise distinct at this precision")]
    DistinctnessFailure,
    #[error("no solution at working precision")]
    NoSolutionAtPrecision,
    #[error("divisibility violation: {0}")]
    DivisibilityViolation(String),
    #[error("descent failure: {0}")]
    DescentFailure(String),
    #[error("digit expansion failed: {0}")]
    DigitFailure(String),
    #[error("series is not in the kernel of the trace operator")]
    NotInKernel,
    #[error("series is not in C: {0}")]
    NotInC(String),
    #[error("lambda is not divisible by pi")]
    LambdaNotDivisible,
    #[error("pi^3 does not divide q")]
    Pi3NotDividingQ,
    #[error("series is not norm compatible: {0}")]
    NotNormCompatible(String),
    #[error("membership failure: {0}")]
    MembershipFailure(String),
    #[error("operation requires q > 2")]
    NeedsQAboveTwo,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("tower level {0} is not available")]
    TowerDepth(usize),
}

pub type Result<T> = std::result::Result<T, ForgeError>;

impl ForgeError {
    pub fn exhausted(what: impl Into<String>) -> Self {
        ForgeError::PrecisionExhausted(what.into())
    }
}
