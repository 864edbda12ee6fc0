use serde::{Deserialize, Serialize};

use super::NumericError;

/// A closed real interval whose endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, NumericError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(NumericError::InvalidInput(format!(
                "interval [{lo}, {hi}] is empty or malformed"
            )));
        }
        if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(NumericError::InvalidInput(format!(
                "interval [{lo}, {hi}] has an endpoint on the wrong side of infinity"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }
}

/// A range of integers `lo..=hi`, `hi` possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: i64,
    /// `None` means the range extends to +infinity.
    pub hi: Option<i64>,
}

impl IntRange {
    pub fn new(lo: i64, hi: Option<i64>) -> Result<Self, NumericError> {
        if let Some(h) = hi {
            if h < lo {
                return Err(NumericError::InvalidInput(format!("integer range [{lo}, {h}] is empty")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn finite(lo: i64, hi: i64) -> Result<Self, NumericError> {
        Self::new(lo, Some(hi))
    }

    pub fn from(lo: i64) -> Self {
        Self { lo, hi: None }
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.lo && self.hi.is_none_or(|h| x <= h)
    }

    pub fn intersect(&self, other: &IntRange) -> Option<IntRange> {
        let lo = self.lo.max(other.lo);
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        };
        if hi.is_some_and(|h| h < lo) {
            None
        } else {
            Some(IntRange { lo, hi })
        }
    }
}

/// Outcome of a quadrature or summation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericReport {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances { abs: 1e-10, rel: 1e-10 };

    pub fn new(abs: f64, rel: f64) -> Result<Self, NumericError> {
        if !(abs > 0.0 && rel > 0.0 && abs.is_finite() && rel.is_finite()) {
            return Err(NumericError::InvalidInput(format!(
                "tolerances must be positive and finite, got abs={abs}, rel={rel}"
            )));
        }
        Ok(Self { abs, rel })
    }

    /// Default tolerances, with `STEINFORGE_TOL` (a single positive number
    /// applied to both) taking precedence when set.
    pub fn from_env() -> Result<Self, NumericError> {
        match std::env::var("STEINFORGE_TOL") {
            Ok(raw) => {
                let tol: f64 = raw.trim().parse().map_err(|_| {
                    NumericError::InvalidInput(format!("STEINFORGE_TOL={raw:?} is not a number"))
                })?;
                Self::new(tol, tol)
            }
            Err(_) => Ok(Self::DEFAULT),
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_rejects_reversed_endpoints() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NAN, 0.0).is_err());
        assert!(Interval::new(f64::NEG_INFINITY, f64::INFINITY).is_ok());
    }

    #[test]
    fn int_range_intersection() {
        let a = IntRange::from(0);
        let b = IntRange::finite(-3, 4).unwrap();
        assert_eq!(a.intersect(&b), Some(IntRange { lo: 0, hi: Some(4) }));
        let c = IntRange::finite(10, 12).unwrap();
        assert_eq!(b.intersect(&c), None);
        assert!(a.contains(1_000_000));
        assert!(!b.contains(5));
    }

    #[test]
    fn tolerances_must_be_positive() {
        assert!(Tolerances::new(0.0, 1e-3).is_err());
        assert!(Tolerances::new(1e-3, f64::INFINITY).is_err());
    }
}
