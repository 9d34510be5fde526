use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("panel count {0} is too small (need at least {min})", min = crate::geometry::MIN_PANELS)]
    TooFewPanels(usize),

    #[error("invalid shape parameter `{name}` = {value}: {reason}")]
    InvalidShape {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("degenerate body: {0}")]
    DegenerateBody(String),

    #[error("body contour self-intersects (panels {0} and {1})")]
    SelfIntersection(usize, usize),

    #[error("incompatible Neumann data: net boundary flux {flux:e} exceeds {tol:e}")]
    IncompatibleFlux { flux: f64, tol: f64 },

    #[error("Neumann data has {got} entries but the body has {expected} panels")]
    DataLength { expected: usize, got: usize },

    #[error("singular influence matrix; try a larger panel count or a non-degenerate geometry")]
    SingularInfluence,

    #[error("added-mass asymmetry {0:e} exceeds tolerance")]
    AddedMassAsymmetry(f64),

    #[error("mass matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("query point ({0}, {1}) lies inside the body")]
    PointInsideBody(f64, f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("zero circulation is a singular limit of the magnetic Casimir")]
    SingularCirculation,

    #[error("mass matrix is not isotropic: {0}")]
    Anisotropic(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("implicit midpoint did not converge at step {step} (residual {residual:e})")]
    MidpointDivergence { step: usize, residual: f64 },

    #[error("non-finite state at step {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
