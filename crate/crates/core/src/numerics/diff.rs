use super::NumericError;

/// Step used by [`central_diff`]: `cbrt(eps) * max(1, |x|, |scale|)`.
pub fn central_step(x: f64, scale: f64) -> f64 {
    f64::EPSILON.cbrt() * 1.0f64.max(x.abs()).max(scale.abs())
}

/// Symmetric difference quotient `(f(x+h) - f(x-h)) / 2h`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, scale: f64) -> Result<f64, NumericError> {
    let h = central_step(x, scale);
    let (xp, xm) = (x + h, x - h);
    let d = (f(xp) - f(xm)) / (xp - xm);
    if d.is_nan() {
        return Err(NumericError::Evaluation { at: x });
    }
    Ok(d)
}

/// `f(x+1) - f(x)` on the integers.
pub fn forward_diff_int<F: Fn(i64) -> f64>(f: F, x: i64) -> Result<f64, NumericError> {
    let d = f(x + 1) - f(x);
    if d.is_nan() {
        return Err(NumericError::Evaluation { at: x as f64 });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivative() {
        let d = central_diff(|t| t * t, 3.0, 0.0).unwrap();
        assert!((d - 6.0).abs() < 1e-7);
    }

    #[test]
    fn constant_has_zero_derivative() {
        assert_eq!(central_diff(|_| 4.2, -17.0, 0.0).unwrap(), 0.0);
        assert_eq!(forward_diff_int(|_| 4.2, 5).unwrap(), 0.0);
    }

    #[test]
    fn exponential_derivative_is_e() {
        let d = central_diff(f64::exp, 1.0, 0.0).unwrap();
        assert!((d - std::f64::consts::E).abs() < 1e-6);
    }

    #[test]
    fn forward_difference_of_square() {
        assert_eq!(forward_diff_int(|j| (j * j) as f64, 2).unwrap(), 5.0);
    }

    #[test]
    fn poisson_mass_flat_between_zero_and_one() {
        let g = |j: i64| (-1.0f64).exp() / (1..=j).map(|i| i as f64).product::<f64>();
        let d = forward_diff_int(g, 0).unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn nan_propagates_as_error() {
        assert!(central_diff(|t| if t > 0.0 { f64::NAN } else { 0.0 }, 0.0, 0.0).is_err());
        assert!(forward_diff_int(|_| f64::NAN, 0).is_err());
    }
}
