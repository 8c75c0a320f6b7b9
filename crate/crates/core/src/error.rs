use thiserror::Error;

/// Errors surfaced by the exact core.
///
/// `RefinementBudget` deserves a note: with rationally independent
/// generators every sign query terminates, so hitting the budget almost
/// always means the declared generators were not independent after all.
#[derive(Debug, Error)]
pub enum Error {
    #[error("refinement budget exceeded after {steps} steps while comparing; the declared generators are likely not rationally independent")]
    RefinementBudget { steps: usize },

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("invalid generator `{name}`: {reason}")]
    InvalidGenerator { name: String, reason: String },

    #[error("parse error in `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("length {index} is not positive")]
    NonpositiveLength { index: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("point {0} is outside the domain")]
    OutOfDomain(String),

    #[error("interval exchanges have different total lengths")]
    TotalMismatch,

    #[error("generators may only be scaled by rationals; products of irrationals are not representable")]
    IrrationalProduct,

    #[error("first-return budget exceeded after {steps} iterations")]
    ReturnBudget { steps: usize },

    #[error("marked points must be strictly increasing inside the open interval")]
    InvalidMarks,

    #[error("step values must match marked points: expected {expected}, got {got}")]
    StepValueCount { expected: usize, got: usize },

    #[error("modulus must be at least 1")]
    InvalidModulus,

    #[error("{0} requires a prime modulus")]
    CompositeModulus(String),

    #[error("closed form does not apply: {0}")]
    FormMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
