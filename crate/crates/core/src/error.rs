use thiserror::Error;

/// Errors raised by the geometry pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("finite-difference stencil leaves the chart domain at {point:?} (direction {direction})")]
    StencilOutOfDomain { point: Vec<f64>, direction: usize },
    #[error("matrix is not Hermitian (asymmetry {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite ODE state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("sample {point:?} lies outside the chart domain")]
    SampleOutOfDomain { point: Vec<f64> },
    #[error("metric is degenerate at {point:?}")]
    DegenerateMetric { point: Vec<f64> },
    #[error("connection system is singular: rank {rank} < {unknowns}")]
    SingularSystem { rank: usize, unknowns: usize },
    #[error("zero vector supplied where a direction is required")]
    ZeroVector,
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("geodesic shooting did not converge (residual {residual:e})")]
    ShootingFailed { residual: f64 },
    #[error("point coincides with the base point")]
    AtBasePoint,
    #[error("point lies within {distance:e} of a cut point")]
    NearCutLocus { distance: f64 },
    #[error("radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("Riccati flow blew up at r = {r} (norm {norm:e})")]
    BlowUp { r: f64, norm: f64 },
    #[error("objective appears unbounded above (value {value:e} at {point:?})")]
    UnboundedObjective { value: f64, point: Vec<f64> },
    #[error("image point {point:?} lies outside the target chart")]
    ImageOutOfTargetChart { point: Vec<f64> },
    #[error("unitary frame construction failed at {point:?}")]
    FrameGaugeFailure { point: Vec<f64> },
    #[error("top eigenvalue is degenerate (gap {gap:e})")]
    EigenvectorDegenerate { gap: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
