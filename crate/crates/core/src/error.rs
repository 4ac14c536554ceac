use thiserror::Error;

/// Errors surfaced by the geometry, collision and solver subsystems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point is not on the domain boundary (distance {distance:e} exceeds tolerance {tolerance:e})")]
    NotOnBoundary { distance: f64, tolerance: f64 },

    #[error("zero velocity has no exit time")]
    ZeroVelocity,

    #[error("lateral intersection is numerically degenerate (discriminant {discriminant:e})")]
    NumericalDegenerate { discriminant: f64 },

    #[error("normal vector is not unit length (|n| = {norm})")]
    NonUnitNormal { norm: f64 },

    #[error("kernel evaluated on the diagonal (|v - v*| = {separation:e})")]
    DiagonalSingularity { separation: f64 },

    #[error("quadrature budget exceeded: {0}")]
    QuadratureBudgetExceeded(String),

    #[error("finite-difference step could not be validated: {0}")]
    FiniteDifferenceStep(String),

    #[error("specular chain broken by a singular-edge hit at bounce {bounce}")]
    ChainBrokenBySingularEdge { bounce: usize },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("iterative solver failed to converge: {0}")]
    NoConvergence(String),

    #[error("fixed-point step is not contractive (factor {factor})")]
    ContractionViolated { factor: f64 },

    #[error("fixed point did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("initial datum too large for the measured smallness ball ({norm} > {threshold})")]
    SmallnessViolated { norm: f64, threshold: f64 },

    #[error("outer iteration diverged: {0}")]
    Divergence(String),

    #[error("measured dissipativity ratio {measured} fails the required bound {bound}")]
    DissipativityNotMet { measured: f64, bound: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
