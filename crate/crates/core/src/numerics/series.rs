use super::{IntRange, NumericError, NumericReport};

const MAX_TERMS: i64 = 10_000_000;
const ZERO_RUN: usize = 64;
const EXACT_SPAN: i64 = 100_000;

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
    abs: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.carry += if self.sum.abs() >= x.abs() { (self.sum - t) + x } else { (x - t) + self.sum };
        self.sum = t;
        self.abs += x.abs();
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }

    fn rounding_bound(&self, terms: usize) -> f64 {
        2.0 * f64::EPSILON * self.abs + f64::EPSILON * self.value().abs() * (terms as f64).log2().max(1.0)
    }
}

/// Sums `f` over `range`.
///
/// Finite ranges are summed exactly up to rounding. For an unbounded range
/// the caller asserts `|f|` is eventually decreasing; summation stops once a
/// geometric-ratio tail bound drops below `abs_tol / 10`.
pub fn sum_series<F: Fn(i64) -> f64>(f: F, range: IntRange, abs_tol: f64) -> Result<NumericReport, NumericError> {
    sum_series_impl(f, range, abs_tol, None::<fn(i64) -> f64>)
}

/// Like [`sum_series`], with a caller-supplied majorant: `majorant(n)` must
/// bound `sum_{j >= n} |f(j)|`.
pub fn sum_series_with_majorant<F, M>(f: F, range: IntRange, abs_tol: f64, majorant: M) -> Result<NumericReport, NumericError>
where
    F: Fn(i64) -> f64,
    M: Fn(i64) -> f64,
{
    sum_series_impl(f, range, abs_tol, Some(majorant))
}

fn sum_series_impl<F, M>(f: F, range: IntRange, abs_tol: f64, majorant: Option<M>) -> Result<NumericReport, NumericError>
where
    F: Fn(i64) -> f64,
    M: Fn(i64) -> f64,
{
    if !(abs_tol > 0.0) {
        return Err(NumericError::InvalidInput(format!("abs_tol must be positive, got {abs_tol}")));
    }
    let term = |j: i64| {
        let v = f(j);
        if v.is_nan() {
            Err(NumericError::Evaluation { at: j as f64 })
        } else {
            Ok(v)
        }
    };

    let mut acc = CompensatedSum::default();
    if let Some(hi) = range.hi.filter(|&h| h.saturating_sub(range.lo) < EXACT_SPAN) {
        let mut n = 0usize;
        for j in range.lo..=hi {
            acc.add(term(j)?);
            n += 1;
        }
        return Ok(NumericReport { value: acc.value(), abs_error_estimate: acc.rounding_bound(n), evaluations: n });
    }

    let target = abs_tol / 10.0;
    let mut prev: Option<f64> = None;
    let mut ratios = [f64::INFINITY; 3];
    let mut zeros = 0usize;
    let mut n = 0usize;
    let last = range.hi.map_or(i64::MAX, |h| h.saturating_add(1));
    for j in range.lo..range.lo.saturating_add(MAX_TERMS).min(last) {
        let t = term(j)?;
        if t.is_infinite() {
            return Err(NumericError::Divergence {
                partial: NumericReport { value: acc.value(), abs_error_estimate: f64::INFINITY, evaluations: n + 1 },
                reason: format!("infinite term at index {j}"),
            });
        }
        acc.add(t);
        n += 1;

        if let Some(m) = &majorant {
            let bound = m(j + 1);
            if bound.is_finite() && bound < target {
                return Ok(NumericReport {
                    value: acc.value(),
                    abs_error_estimate: bound + acc.rounding_bound(n),
                    evaluations: n,
                });
            }
            continue;
        }

        if t == 0.0 {
            zeros += 1;
            if zeros >= ZERO_RUN {
                return Ok(NumericReport { value: acc.value(), abs_error_estimate: acc.rounding_bound(n), evaluations: n });
            }
            prev = None;
            continue;
        }
        zeros = 0;
        if let Some(p) = prev {
            ratios.rotate_left(1);
            ratios[2] = t.abs() / p.abs();
        }
        prev = Some(t);
        let r = ratios.iter().copied().fold(0.0, f64::max);
        if r < 1.0 {
            let bound = t.abs() * r / (1.0 - r);
            if bound < target {
                return Ok(NumericReport {
                    value: acc.value(),
                    abs_error_estimate: bound + acc.rounding_bound(n),
                    evaluations: n,
                });
            }
        }
    }
    if range.hi.is_some_and(|h| h.saturating_sub(range.lo) < MAX_TERMS) {
        return Ok(NumericReport { value: acc.value(), abs_error_estimate: acc.rounding_bound(n), evaluations: n });
    }
    Err(NumericError::Divergence {
        partial: NumericReport { value: acc.value(), abs_error_estimate: f64::INFINITY, evaluations: n },
        reason: format!("tail bound not reached within {MAX_TERMS} terms"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson(lambda: f64) -> impl Fn(i64) -> f64 {
        move |j: i64| {
            if j < 0 {
                return 0.0;
            }
            let mut p = (-lambda).exp();
            for i in 1..=j {
                p *= lambda / i as f64;
            }
            p
        }
    }

    #[test]
    fn poisson_mass_normalizes() {
        let r = sum_series(poisson(1.0), IntRange::from(0), 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn finite_sum_is_exact() {
        let r = sum_series(|j| j as f64, IntRange::finite(0, 3).unwrap(), 1e-12).unwrap();
        assert_eq!(r.value, 6.0);
        assert_eq!(r.evaluations, 4);
    }

    #[test]
    fn poisson_mean_matches_direct_200_terms() {
        let p = poisson(1.0);
        let direct: f64 = (0..200).map(|j| j as f64 * p(j)).sum();
        let r = sum_series(|j| j as f64 * p(j), IntRange::from(0), 1e-10).unwrap();
        assert!((r.value - direct).abs() < 1e-10);
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn growing_then_decaying_terms() {
        // Poisson(20) mass rises before it falls
        let r = sum_series(poisson(20.0), IntRange::from(0), 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11, "{r:?}");
    }

    #[test]
    fn majorant_stops_summation() {
        // sum 2^-j, tail from n is 2^{1-n}
        let r = sum_series_with_majorant(|j| 0.5f64.powi(j as i32), IntRange::from(0), 1e-12, |n| 0.5f64.powi(n as i32 - 1))
            .unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn divergent_series_reports_partial() {
        let err = sum_series(|_| 1.0, IntRange::from(0), 1e-10).unwrap_err();
        assert!(matches!(err, NumericError::Divergence { .. }));
    }
}
