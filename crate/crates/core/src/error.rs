use std::path::PathBuf;

/// Errors produced anywhere in the forward/inverse pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-positive radius {radius:.3e} at theta = {theta:.6}")]
    NonPositiveRadius { theta: f64, radius: f64 },

    #[error("node count {0} must be even and at least 8")]
    BadNodeCount(usize),

    #[error("too few nodes: got {got}, need at least {min}")]
    TooFewNodes { got: usize, min: usize },

    #[error("degenerate shape: area {area:.3e} below {min_area:.3e}")]
    DegenerateShape { area: f64, min_area: f64 },

    #[error("curves too close: distance {distance:.3e} < guard {guard:.3e}")]
    CurvesTouch { distance: f64, guard: f64 },

    #[error("singular boundary-integral system: {0}")]
    SingularSystem(String),

    #[error("incompatible Neumann data: boundary integral {integral:.3e} is not zero")]
    IncompatibleFlux { integral: f64 },

    #[error("eigenvalue solve failed: {0}")]
    EigSolveFailure(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("descent diverged: {0}")]
    Diverged(String),

    #[error("step size collapsed below {0:.3e}")]
    StepCollapse(f64),

    #[error("ill-conditioned least-squares system (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for input/configuration problems, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::Parse(_)
                | Error::MissingArtifact(_)
                | Error::Io(_)
                | Error::BadNodeCount(_)
                | Error::TooFewNodes { .. }
                | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
