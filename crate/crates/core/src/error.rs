use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected {expected} joint values, got {actual}")]
    Arity { expected: usize, actual: usize },

    /// Target outside the annulus swept by the two-link leg.
    #[error("target unreachable: |AC| = {distance:.6} mm outside [{min:.6}, {max:.6}]")]
    Unreachable { distance: f64, min: f64, max: f64 },

    #[error("joint {joint} = {value:.6} rad outside limits [{min:.6}, {max:.6}]")]
    JointLimit { joint: String, value: f64, min: f64, max: f64 },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("contact set is empty, no support polygon")]
    NoSupport,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
