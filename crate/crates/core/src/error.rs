use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {0:?} lies outside the space")]
    OutsideSpace(Vec<f64>),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("unbalanced masses: {0} vs {1}")]
    Unbalanced(f64, f64),

    #[error("non-finite cost between atoms {0} and {1}")]
    NonFiniteCost(usize, usize),

    #[error("weighted measure is not integrable for C = {0}; choose a larger C")]
    NonIntegrable(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("values are not {lipschitz}-Lipschitz: |f(a) - f(b)| = {gap} exceeds {bound}")]
    NotLipschitz {
        lipschitz: f64,
        gap: f64,
        bound: f64,
    },

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("transition kernel not sampleable: negative mass {0:e}")]
    Unsampleable(f64),

    #[error("time {0} is not on the sampling grid")]
    MissingTime(f64),

    #[error("time grids do not match")]
    GridMismatch,

    #[error("projection onto the domain failed at {0:?}")]
    Projection(Vec<f64>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}
