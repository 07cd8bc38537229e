use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (residual {residual:.3e})")]
    NonSymmetric { residual: f64 },
    #[error("matrix is singular (smallest singular value {sigma_min:.3e})")]
    SingularMatrix { sigma_min: f64 },
    #[error("real part has a negative eigenvalue {eigenvalue:.3e}")]
    RealPartNegative { eigenvalue: f64 },
    #[error("determinant path passes through zero near t = {t}")]
    PathCrossesZero { t: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("imaginary part is not positive definite (smallest eigenvalue {eigenvalue:.3e})")]
    NotInUpperHalfSpace { eigenvalue: f64 },
    #[error("point lies outside the closed Siegel disc (eigenvalue of I - tau* tau = {eigenvalue:.3e})")]
    NotInDisc { eigenvalue: f64 },
    #[error("Cayley chart is singular: |det(1 + tau)| = {det_abs:.3e}")]
    ChartSingular { det_abs: f64 },
    #[error("matrix is not symplectic (residual {residual:.3e})")]
    NotSymplectic { residual: f64 },
    #[error("boundary action has no solution: the linear system is singular")]
    NoSolution,

    #[error("invalid characteristic: {0}")]
    InvalidCharacteristic(String),
    #[error("lattice sum truncation failed: required radius {required} exceeds the limit {limit}")]
    TruncationFailure { required: usize, limit: usize },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("window too small: component magnitude {edge:.3e} at the window edge")]
    WindowTooSmall { edge: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("generator has singular L (|det L| = {det_abs:.3e})")]
    SingularL { det_abs: f64 },
    #[error("Omega + Q is singular (|det| = {det_abs:.3e}); reroute through another decomposition")]
    SingularShift { det_abs: f64 },
    #[error("could not decompose the symplectic matrix into metaplectic generators")]
    DecompositionFailure,
    #[error("invalid metaplectic generator: {0}")]
    InvalidGenerator(String),

    #[error("degenerate pair: {0}")]
    DegeneratePair(String),
    #[error("Gram matrix is ill conditioned (condition number {cond:.3e})")]
    IllConditionedGram { cond: f64 },
    #[error("polarization is not real and reducible: {0}")]
    NotReducible(String),
    #[error("no integer symplectic transformation found within entry bound {bound}")]
    NoIntegerTransformFound { bound: i64 },
    #[error("polarizations are not transverse")]
    NotTransverse,
    #[error("limit did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("search radius too small: a minimizer lies on the box boundary")]
    RadiusTooSmall,
    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("invalid geodesic ray: {0}")]
    InvalidRay(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
