use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point is not interior to the domain (signed distance {signed_distance:e})")]
    NotInterior { signed_distance: f64 },

    #[error("point is not on the boundary (|rho| = {residual:e})")]
    NotOnBoundary { residual: f64 },

    #[error("defining function gradient vanishes (|grad rho| = {norm:e})")]
    DegenerateGradient { norm: f64 },

    #[error("ambiguous boundary projection: feet {first:?} and {second:?} are equidistant")]
    AmbiguousProjection { first: Vec<f64>, second: Vec<f64> },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("unsupported domain for {operation}: {kind}")]
    Unsupported {
        operation: &'static str,
        kind: String,
    },

    #[error(
        "quadrature too coarse: node spacing {spacing:e} exceeds distance to boundary {delta:e}"
    )]
    RefinementNeeded { spacing: f64, delta: f64 },

    #[error("walk truncated after {steps} steps")]
    WalkTruncated { steps: usize },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("finite-difference step {step:e} too large for distance {distance:e}")]
    StepUnderflow { step: f64, distance: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures as opposed to bad input; the CLI maps these to exit status 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::WalkTruncated { .. }
                | Error::EstimationFailed(_)
                | Error::RefinementNeeded { .. }
                | Error::StepUnderflow { .. }
                | Error::AmbiguousProjection { .. }
        )
    }
}
