use thiserror::Error;

/// Errors raised while parsing, solving or certifying a trap.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("potential is not confining: {0}")]
    NonConfining(String),

    #[error("malformed specification: {0}")]
    MalformedSpec(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),

    #[error("corridor violation: lower {lower:.6e} <= {value:.6e} <= upper {upper:.6e} fails")]
    CorridorViolation { lower: f64, value: f64, upper: f64 },

    #[error("curvature unavailable: {0}")]
    CurvatureUnavailable(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("guiding center undefined at zero magnetic field")]
    ZeroField,

    #[error("perturbative reference outside its validity window: {0}")]
    OutOfValidity(String),

    #[error("problem too large for dense diagonalization: {0}")]
    TooLarge(String),

    #[error("bad density samples: {0}")]
    BadDensity(String),

    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
