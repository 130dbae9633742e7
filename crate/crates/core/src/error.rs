use thiserror::Error;

use crate::linprog::LpError;

pub type Result<T, E = ReachError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReachError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("step size too large: exponential remainder {remainder:e} exceeds {limit:e}")]
    StepSize { remainder: f64, limit: f64 },

    #[error("linearization domain did not settle after {iterations} iterations")]
    LinearizationDomain { iterations: usize },

    #[error("measure undefined: {0}")]
    UndefinedMeasure(&'static str),

    #[error("mapping not applicable: {0}")]
    MappingInapplicable(String),

    #[error("scaling not applicable: {0}")]
    ScalingInapplicable(String),

    #[error("guard hit window longer than {0} steps")]
    UnboundedHit(usize),

    #[error("no guard crossing within {0} steps")]
    NoCrossing(usize),

    #[error("scaling phase did not terminate within {0} steps")]
    ScalingLimit(usize),

    #[error("geometric and scaled-mapping enclosures are disjoint ({0})")]
    DisjointEnclosures(String),

    #[error("branch limit of {0} exceeded")]
    BranchLimit(usize),

    #[error("jump depth limit of {0} exceeded")]
    JumpLimit(usize),

    #[error("empty initial set")]
    EmptyInitialSet,

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

impl ReachError {
    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        ReachError::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
