//! Deterministic quadrature, series summation and differencing.
//!
//! Everything here is pure and reentrant.

mod diff;
mod domain;
mod quadrature;
mod series;

use thiserror::Error;

pub use diff::{central_diff, central_step, forward_diff_int};
pub use domain::{IntRange, Interval, NumericReport, Tolerances};
pub use quadrature::{integrate, integrate_with, QuadratureOptions};
pub use series::{sum_series, sum_series_with_majorant};


#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericError {
    #[error("did not converge ({reason}); partial value {} with error estimate {}", partial.value, partial.abs_error_estimate)]
    Divergence { partial: NumericReport, reason: String },
    #[error("integrand or summand evaluated to NaN at {at}")]
    Evaluation { at: f64 },
    #[error("invalid numeric input: {0}")]
    InvalidInput(String),
}
