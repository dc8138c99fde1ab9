use thiserror::Error;

/// Failures raised by the geometry, field, certification and transport layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The pair of points is at (or beyond) the injectivity radius, so
    /// log/distance derivatives are not defined there.
    #[error("points are on (or beyond) the cut locus: distance {distance} vs injectivity radius {inj}")]
    CutLocus { distance: f64, inj: f64 },

    /// The derivative of the distance is undefined when both points coincide.
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid ramp profile: {0}")]
    InvalidRamp(String),

    #[error("invalid radius {delta}: must not exceed {bound}")]
    InvalidRadius { delta: f64, bound: f64 },

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("mixing coefficient too large: g - hess f has min eigenvalue {margin} at distance {distance} from the pole")]
    MixTooLarge { margin: f64, distance: f64 },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("problem size {n} exceeds the limit {limit}")]
    SizeLimit { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
