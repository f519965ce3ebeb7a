use thiserror::Error;

/// Errors produced by the clustering and transport routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible transport problem: {0}")]
    Infeasible(String),

    #[error("sinkhorn did not converge in {iterations} iterations (marginal residual {residual:e})")]
    SinkhornNotConverged { iterations: usize, residual: f64 },

    #[error("regularization too small for log-domain off")]
    RegularizationTooSmall,

    #[error("geometric median did not converge in {iterations} iterations (last step {step:e})")]
    MedianNotConverged {
        iterations: usize,
        point: Vec<f64>,
        step: f64,
    },

    #[error("barycenter weights diverged; try a smaller step t0")]
    BarycenterDiverged,

    #[error("barycenter did not converge in {} outer iterations", trace.len().saturating_sub(1))]
    BarycenterNotConverged { trace: Vec<f64> },

    #[error("k = {k} exceeds the number of distinct points ({distinct})")]
    TooManyClusters { k: usize, distinct: usize },

    #[error("degenerate: data equals quantizers")]
    DegenerateLambda,

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("dataset has no context vectors")]
    MissingContexts,

    #[error("lp solver: {0}")]
    Lp(String),

    #[error("task {index} failed: {source}")]
    Task {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
