use thiserror::Error;

use crate::numerics::NumericError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SteinError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("invalid parameters for {family}: {reason}")]
    Parameter { family: String, reason: String },
    #[error("x = {x} lies outside the support")]
    OutsideSupport { x: f64 },
    #[error("density vanishes at x = {x} inside the support")]
    DegenerateDensity { x: f64 },
    #[error("discrete kernel psi vanishes at x = {x}")]
    DegeneratePsi { x: i64 },
    #[error("operator is singular at support endpoint x = {x}")]
    Boundary { x: f64 },
    #[error("P(Z_u in S_theta) vanishes at u = {u}")]
    Conditioning { u: f64 },
    #[error("every battery member has zero empirical deviation")]
    DegenerateBattery,
    #[error("capability missing: {0}")]
    Capability(String),
    #[error("incompatible request: {0}")]
    Incompatible(String),
    #[error("input error: {0}")]
    Input(String),
}

impl SteinError {
    pub(crate) fn param(family: &str, reason: impl Into<String>) -> Self {
        SteinError::Parameter { family: family.to_string(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, SteinError>;
