use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SteinError};
use crate::families::precision_matrix;
use crate::numerics::central_diff;

/// `∂_j f_0(x) − (Σ⁻¹(x − m))_j f_0(x)` for the Gaussian `N(m, Σ)` on `R^k`.
/// `cov` is row-major `k × k`; `j` is zero-based.
pub fn multivariate_gaussian_apply(
    mean: &[f64],
    cov: &[f64],
    j: usize,
    f0: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
) -> Result<f64> {
    let k = x.len();
    let fam = "gaussian_multivariate";
    if mean.len() != k || cov.len() != k * k {
        return Err(SteinError::param(fam, format!("dimension mismatch: x has {k} coordinates")));
    }
    if j >= k {
        return Err(SteinError::Input(format!("coordinate {j} out of range for dimension {k}")));
    }
    let precision = precision_matrix(&DMatrix::from_row_slice(k, k, cov)).map_err(|r| SteinError::param(fam, r))?;
    let centered = DVector::from_iterator(k, x.iter().zip(mean).map(|(a, b)| a - b));
    let sigma_j = (precision * centered)[j];
    let partial = central_diff(
        |y| {
            let mut z = x.to_vec();
            z[j] = y;
            f0(&z)
        },
        x[j],
        0.0,
    )?;
    Ok(partial - sigma_j * f0(x))
}
