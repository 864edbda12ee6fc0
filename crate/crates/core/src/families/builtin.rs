use std::f64::consts::PI;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::factorial::{ln_binomial, ln_factorial};
use statrs::function::gamma::{digamma, ln_gamma};

use super::{Kind, ParamSpace, Structure, Support};
use crate::error::{Result, SteinError};
use crate::numerics::{IntRange, Interval};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

fn std_normal_quantile(u: f64) -> f64 {
    Normal::standard().inverse_cdf(u)
}

/// Integer value of `x`, or `None` when `x` is not an integer.
pub(crate) fn as_int(x: f64) -> Option<i64> {
    (x.fract() == 0.0 && x.abs() < 9.0e15).then_some(x as i64)
}

#[derive(Debug, Clone)]
pub(crate) enum Builtin {
    GaussianLoc { sigma: f64 },
    GaussianScale,
    ExponentialLoc { lambda: f64 },
    ExponentialScale,
    UniformA { b: f64 },
    UniformLoc { a: f64, b: f64 },
    SemicircleLoc { sigma: f64 },
    StudentNu,
    PoissonLambda,
    GeometricP,
    BinomialP { n: u64 },
    /// Univariate slice in `p1` with the other categories held fixed.
    MultinomialSlice { n_bar: u64, p_bar: f64 },
    /// Conditional law of coordinate `j` given the others, as a location
    /// family in `mu_j`.
    GaussianMultivCoord { shift: f64, sd: f64 },
}

pub(crate) struct BuiltinSpec {
    pub model: Builtin,
    pub kind: Kind,
    pub structure: Structure,
    pub param_space: ParamSpace,
    pub theta0: f64,
    pub params: Vec<f64>,
}

fn real_line() -> Interval {
    Interval::real_line()
}

fn open(lo: f64, hi: f64) -> Interval {
    Interval { lo, hi }
}

fn take(name: &str, params: &[f64], defaults: &[f64]) -> Result<Vec<f64>> {
    if params.len() > defaults.len() {
        return Err(SteinError::param(
            name,
            format!("expected at most {} parameters, got {}", defaults.len(), params.len()),
        ));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(SteinError::param(name, "parameters must be finite"));
    }
    let mut out = defaults.to_vec();
    out[..params.len()].copy_from_slice(params);
    Ok(out)
}

fn count(name: &str, v: f64, what: &str) -> Result<u64> {
    if v < 0.0 || v.fract() != 0.0 || v > 1.0e9 {
        return Err(SteinError::param(name, format!("{what} must be a non-negative integer, got {v}")));
    }
    Ok(v as u64)
}

pub(crate) fn build(name: &str, params: &[f64]) -> Result<BuiltinSpec> {
    use Builtin::*;
    let cont = Kind::Continuous;
    let disc = Kind::Discrete;
    let space = |iv: Interval| ParamSpace { dim: 1, bounds: vec![iv] };
    let spec = |model, kind, structure, bounds, theta0, params| BuiltinSpec {
        model,
        kind,
        structure,
        param_space: space(bounds),
        theta0,
        params,
    };
    Ok(match name {
        "gaussian_loc" => {
            let p = take(name, params, &[1.0])?;
            if p[0] <= 0.0 {
                return Err(SteinError::param(name, "sigma must be positive"));
            }
            spec(GaussianLoc { sigma: p[0] }, cont, Structure::Location, real_line(), 0.0, p)
        }
        "gaussian_scale" => {
            take(name, params, &[])?;
            spec(GaussianScale, cont, Structure::Scale, open(0.0, f64::INFINITY), 1.0, vec![])
        }
        "exponential_loc" => {
            let p = take(name, params, &[1.0])?;
            if p[0] <= 0.0 {
                return Err(SteinError::param(name, "lambda must be positive"));
            }
            spec(ExponentialLoc { lambda: p[0] }, cont, Structure::Location, real_line(), 0.0, p)
        }
        "exponential_scale" => {
            take(name, params, &[])?;
            spec(ExponentialScale, cont, Structure::Scale, open(0.0, f64::INFINITY), 1.0, vec![])
        }
        "uniform_a" => {
            let p = take(name, params, &[1.0])?;
            spec(UniformA { b: p[0] }, cont, Structure::Other, open(f64::NEG_INFINITY, p[0]), p[0] - 1.0, p)
        }
        "uniform_loc" => {
            let p = take(name, params, &[0.0, 1.0])?;
            if p[1] <= p[0] {
                return Err(SteinError::param(name, "need a < b"));
            }
            spec(UniformLoc { a: p[0], b: p[1] }, cont, Structure::Location, real_line(), 0.0, p)
        }
        "semicircle_loc" => {
            let p = take(name, params, &[2.0])?;
            if p[0] <= 0.0 {
                return Err(SteinError::param(name, "sigma must be positive"));
            }
            spec(SemicircleLoc { sigma: p[0] }, cont, Structure::Location, real_line(), 0.0, p)
        }
        "student_nu" => {
            take(name, params, &[])?;
            spec(StudentNu, cont, Structure::Other, open(2.0, f64::INFINITY), 4.0, vec![])
        }
        "poisson_lambda" => {
            take(name, params, &[])?;
            spec(PoissonLambda, disc, Structure::Discrete, open(0.0, f64::INFINITY), 1.0, vec![])
        }
        "geometric_p" => {
            take(name, params, &[])?;
            spec(GeometricP, disc, Structure::Discrete, open(0.0, 1.0), 0.5, vec![])
        }
        "binomial_p" => {
            let p = take(name, params, &[10.0])?;
            let n = count(name, p[0], "n")?;
            if n == 0 {
                return Err(SteinError::param(name, "n must be at least 1"));
            }
            spec(BinomialP { n }, disc, Structure::Discrete, open(0.0, 1.0), 0.3, p)
        }
        "multinomial_p1_slice" => multinomial(params)?,
        "gaussian_multiv_coord" => multiv_coord(params)?,
        other => return Err(SteinError::UnknownFamily(other.to_string())),
    })
}

fn multinomial(params: &[f64]) -> Result<BuiltinSpec> {
    let name = "multinomial_p1_slice";
    let p = if params.is_empty() { vec![10.0, 0.2, 3.0] } else { params.to_vec() };
    if p.len() % 2 == 0 || p.iter().any(|v| !v.is_finite()) {
        return Err(SteinError::param(name, "expected [n, p2, x2, p3, x3, ...]"));
    }
    let n = count(name, p[0], "n")?;
    let mut p_rest = 0.0;
    let mut x_rest = 0u64;
    for pair in p[1..].chunks(2) {
        if !(pair[0] > 0.0 && pair[0] < 1.0) {
            return Err(SteinError::param(name, format!("category probability {} not in (0,1)", pair[0])));
        }
        p_rest += pair[0];
        x_rest += count(name, pair[1], "category count")?;
    }
    if p_rest >= 1.0 {
        return Err(SteinError::param(name, "fixed category probabilities must sum below 1"));
    }
    if x_rest > n {
        return Err(SteinError::param(name, "fixed category counts exceed n"));
    }
    let n_bar = n - x_rest;
    if n_bar == 0 {
        return Err(SteinError::param(name, "no trials left for the first category"));
    }
    let p_bar = 1.0 - p_rest;
    Ok(BuiltinSpec {
        model: Builtin::MultinomialSlice { n_bar, p_bar },
        kind: Kind::Discrete,
        structure: Structure::Discrete,
        param_space: ParamSpace { dim: 1, bounds: vec![open(0.0, p_bar)] },
        theta0: if p_bar > 0.6 { 0.3 } else { 0.5 * p_bar },
        params: p,
    })
}

fn multiv_coord(params: &[f64]) -> Result<BuiltinSpec> {
    let name = "gaussian_multiv_coord";
    let p = if params.is_empty() { vec![2.0, 0.0, 2.0, 0.5, 0.5, 1.0, 0.7] } else { params.to_vec() };
    if p.iter().any(|v| !v.is_finite()) {
        return Err(SteinError::param(name, "parameters must be finite"));
    }
    let k = count(name, p[0], "k")? as usize;
    if k < 1 || p.len() < 2 {
        return Err(SteinError::param(name, "expected [k, j, covariance (k*k, row-major), x_other (k-1)]"));
    }
    let j = count(name, p[1], "j")? as usize;
    if j >= k {
        return Err(SteinError::param(name, format!("coordinate j = {j} out of range for k = {k}")));
    }
    if p.len() != 2 + k * k + (k - 1) {
        return Err(SteinError::param(
            name,
            format!("expected {} values for k = {k}, got {}", 2 + k * k + (k - 1), p.len()),
        ));
    }
    let cov = DMatrix::from_row_slice(k, k, &p[2..2 + k * k]);
    let precision = precision_matrix(&cov).map_err(|reason| SteinError::param(name, reason))?;
    let x_other = &p[2 + k * k..];
    let pjj = precision[(j, j)];
    let mut acc = 0.0;
    let mut it = x_other.iter();
    for i in (0..k).filter(|&i| i != j) {
        acc += precision[(j, i)] * it.next().copied().unwrap_or(0.0);
    }
    Ok(BuiltinSpec {
        model: Builtin::GaussianMultivCoord { shift: -acc / pjj, sd: 1.0 / pjj.sqrt() },
        kind: Kind::Continuous,
        structure: Structure::Location,
        param_space: ParamSpace { dim: 1, bounds: vec![real_line()] },
        theta0: 0.0,
        params: p,
    })
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn precision_matrix(cov: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, String> {
    let k = cov.nrows();
    if cov.ncols() != k {
        return Err("covariance must be square".into());
    }
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    if (cov - cov.transpose()).amax() > 1e-12 * scale {
        return Err("covariance must be symmetric".into());
    }
    let chol = cov.clone().cholesky().ok_or_else(|| "covariance is not positive definite".to_string())?;
    Ok(chol.inverse())
}

impl Builtin {
    pub(crate) fn support(&self, theta: f64) -> Support {
        use Builtin::*;
        let c = |lo, hi| Support::Continuous(Interval { lo, hi });
        match *self {
            GaussianLoc { .. } | GaussianScale | StudentNu | GaussianMultivCoord { .. } => c(f64::NEG_INFINITY, f64::INFINITY),
            ExponentialLoc { .. } => c(theta, f64::INFINITY),
            ExponentialScale => c(0.0, f64::INFINITY),
            UniformA { b } => c(theta, b),
            UniformLoc { a, b } => c(a + theta, b + theta),
            SemicircleLoc { sigma } => c(theta - sigma, theta + sigma),
            PoissonLambda | GeometricP => Support::Discrete(IntRange::from(0)),
            BinomialP { n } => Support::Discrete(IntRange { lo: 0, hi: Some(n as i64) }),
            MultinomialSlice { n_bar, .. } => Support::Discrete(IntRange { lo: 0, hi: Some(n_bar as i64) }),
        }
    }

    pub(crate) fn density(&self, x: f64, t: f64) -> f64 {
        use Builtin::*;
        if !self.support(t).contains(x) {
            return 0.0;
        }
        match *self {
            GaussianLoc { sigma } => std_normal_pdf((x - t) / sigma) / sigma,
            GaussianScale => t * std_normal_pdf(t * x),
            ExponentialLoc { lambda } => lambda * (-lambda * (x - t)).exp(),
            ExponentialScale => t * (-t * x).exp(),
            UniformA { b } => 1.0 / (b - t),
            UniformLoc { a, b } => 1.0 / (b - a),
            SemicircleLoc { sigma } => {
                let y = x - t;
                2.0 / (PI * sigma * sigma) * (sigma * sigma - y * y).max(0.0).sqrt()
            }
            StudentNu => student_log_density(x, t).exp(),
            GaussianMultivCoord { shift, sd } => std_normal_pdf((x - t - shift) / sd) / sd,
            PoissonLambda | GeometricP | BinomialP { .. } | MultinomialSlice { .. } => match as_int(x) {
                Some(k) => self.mass(k, t),
                None => 0.0,
            },
        }
    }

    fn mass(&self, k: i64, t: f64) -> f64 {
        use Builtin::*;
        let k_u = k as u64;
        match *self {
            PoissonLambda => (k as f64 * t.ln() - t - ln_factorial(k_u)).exp(),
            GeometricP => t * (1.0 - t).powi(k as i32),
            BinomialP { n } => binomial_mass(n, k_u, t),
            MultinomialSlice { n_bar, p_bar } => binomial_mass(n_bar, k_u, t / p_bar),
            _ => unreachable!("mass on a continuous builtin"),
        }
    }

    pub(crate) fn param_score(&self, x: f64, t: f64) -> f64 {
        use Builtin::*;
        match *self {
            GaussianLoc { sigma } => (x - t) / (sigma * sigma),
            GaussianScale => 1.0 / t - t * x * x,
            ExponentialLoc { lambda } => lambda,
            ExponentialScale => 1.0 / t - x,
            UniformA { b } => 1.0 / (b - t),
            UniformLoc { .. } => 0.0,
            SemicircleLoc { sigma } => {
                let y = x - t;
                y / (sigma * sigma - y * y)
            }
            StudentNu => {
                let q = x * x / t;
                0.5 * (digamma(0.5 * (t + 1.0)) - digamma(0.5 * t) - 1.0 / t - q.ln_1p() + (t + 1.0) * q / (t * (1.0 + q)))
            }
            GaussianMultivCoord { shift, sd } => (x - t - shift) / (sd * sd),
            PoissonLambda => x / t - 1.0,
            GeometricP => 1.0 / t - x / (1.0 - t),
            BinomialP { n } => x / t - (n as f64 - x) / (1.0 - t),
            MultinomialSlice { n_bar, p_bar } => x / t - (n_bar as f64 - x) / (p_bar - t),
        }
    }

    /// `d/dx log g(x; t)` on the open support.
    pub(crate) fn spatial_log_derivative(&self, x: f64, t: f64) -> Option<f64> {
        use Builtin::*;
        Some(match *self {
            GaussianLoc { sigma } => -(x - t) / (sigma * sigma),
            GaussianScale => -t * t * x,
            ExponentialLoc { lambda } => -lambda,
            ExponentialScale => -t,
            UniformA { .. } | UniformLoc { .. } => 0.0,
            SemicircleLoc { sigma } => {
                let y = x - t;
                -y / (sigma * sigma - y * y)
            }
            StudentNu => -(t + 1.0) * x / (t + x * x),
            GaussianMultivCoord { shift, sd } => -(x - t - shift) / (sd * sd),
            PoissonLambda | GeometricP | BinomialP { .. } | MultinomialSlice { .. } => return None,
        })
    }

    /// `d/du (g(k; u) / g(0; u))` at `u = t`.
    pub(crate) fn psi(&self, k: i64, t: f64) -> Option<f64> {
        use Builtin::*;
        if !matches!(self, PoissonLambda | GeometricP | BinomialP { .. } | MultinomialSlice { .. }) {
            return None;
        }
        if k <= 0 {
            return Some(0.0);
        }
        let kf = k as f64;
        let ku = k as u64;
        Some(match *self {
            PoissonLambda => ((kf - 1.0) * t.ln() - ln_factorial(ku - 1)).exp(),
            GeometricP => -kf * (1.0 - t).powi(k as i32 - 1),
            BinomialP { n } => {
                if ku > n {
                    0.0
                } else {
                    kf * (ln_binomial(n, ku) + (kf - 1.0) * t.ln() - (kf + 1.0) * (1.0 - t).ln()).exp()
                }
            }
            MultinomialSlice { n_bar, p_bar } => {
                if ku > n_bar {
                    0.0
                } else {
                    let d = p_bar - t;
                    kf * p_bar / (d * d) * (ln_binomial(n_bar, ku) + (kf - 1.0) * (t / d).ln()).exp()
                }
            }
            _ => return None,
        })
    }

    pub(crate) fn quantile(&self, u: f64, t: f64) -> f64 {
        use Builtin::*;
        match *self {
            GaussianLoc { sigma } => t + sigma * std_normal_quantile(u),
            GaussianScale => std_normal_quantile(u) / t,
            ExponentialLoc { lambda } => t - (-u).ln_1p() / lambda,
            ExponentialScale => -(-u).ln_1p() / t,
            UniformA { b } => t + u * (b - t),
            UniformLoc { a, b } => t + a + u * (b - a),
            SemicircleLoc { sigma } => t + semicircle_quantile(u, sigma),
            StudentNu => StudentsT::new(0.0, 1.0, t).map(|d| d.inverse_cdf(u)).unwrap_or(f64::NAN),
            GaussianMultivCoord { shift, sd } => t + shift + sd * std_normal_quantile(u),
            GeometricP => {
                let k = ((-u).ln_1p() / (1.0 - t).ln()).ceil() - 1.0;
                k.max(0.0)
            }
            PoissonLambda | BinomialP { .. } | MultinomialSlice { .. } => {
                let hi = match self.support(t) {
                    Support::Discrete(r) => r.hi,
                    Support::Continuous(_) => unreachable!(),
                };
                let mut acc = 0.0;
                let mut k = 0i64;
                loop {
                    acc += self.mass(k, t);
                    if acc >= u || hi.is_some_and(|h| k >= h) || k > 100_000_000 {
                        return k as f64;
                    }
                    k += 1;
                }
            }
        }
    }
}

fn binomial_mass(n: u64, k: u64, q: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let kf = k as f64;
    let rest = (n - k) as f64;
    let log_q = if k == 0 { 0.0 } else { kf * q.ln() };
    let log_r = if k == n { 0.0 } else { rest * (-q).ln_1p() };
    (ln_binomial(n, k) + log_q + log_r).exp()
}

fn student_log_density(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln() - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

pub(crate) fn semicircle_cdf(y: f64, sigma: f64) -> f64 {
    if y <= -sigma {
        return 0.0;
    }
    if y >= sigma {
        return 1.0;
    }
    let s2 = sigma * sigma;
    0.5 + y * (s2 - y * y).sqrt() / (PI * s2) + (y / sigma).asin() / PI
}

fn semicircle_quantile(u: f64, sigma: f64) -> f64 {
    let (mut lo, mut hi) = (-sigma, sigma);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if semicircle_cdf(mid, sigma) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
