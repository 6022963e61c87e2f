use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("weight exp({exponent}) overflows f64; reduce q, T or the frequency range")]
    WeightOverflow { exponent: f64 },

    #[error("direction vector must have unit length, got norm {norm}")]
    NonUnitDirection { norm: f64 },

    #[error("projection onto the level set did not converge from {start:?} (|phi| = {residual:e})")]
    ProjectionDiverged { start: [f64; 3], residual: f64 },

    #[error("level-set gradient vanishes at {0:?}")]
    ZeroGradient([f64; 3]),

    #[error("only {found} distinct candidates survived, {needed} requested")]
    InsufficientCandidates { found: usize, needed: usize },

    #[error("rejection sampling found no interior candidates after {attempts} draws")]
    InteriorSamplingFailed { attempts: usize },

    #[error("degenerate boundary tangent at {0:?}")]
    DegenerateTangent([f64; 3]),

    #[error("missing geometric data: {0}")]
    MissingGeometry(&'static str),

    #[error("assembly needs {needed} bytes of chunk workspace, budget is {budget}")]
    MemoryBudget { needed: usize, budget: usize },

    #[error(
        "Phi(lambda = {lambda}) is not numerically positive definite (pivot {pivot}); \
         increase the number of basis functions or reduce the number of points"
    )]
    NotPositiveDefinite { lambda: f64, pivot: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
