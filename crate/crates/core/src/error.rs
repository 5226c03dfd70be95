use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate geometry: query point coincides with the sensor position")]
    DegenerateGeometry,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("silent window: sum of per-row standard deviations is zero")]
    SilentWindow,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("FastICA did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("trajectory leaves the arena at ({x:.3}, {y:.3})")]
    OutsideArena { x: f64, y: f64 },
    #[error("extremum times must satisfy t1 < t2 < t3 (got {t1}, {t2}, {t3})")]
    NonMonotoneExtrema { t1: usize, t2: usize, t3: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
