use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::EventSet;
use crate::error::{Result, SteinError};
use crate::families::ParametricFamily;
use crate::numerics::{integrate, Interval};
use crate::test_functions::TestFunction;

/// `f_A(x; θ) = (1/g(x;θ)) ∫_{θ0}^{θ} l_A(x; u, θ) g(x; u) du`, with
/// `l_A(x; u, θ) = (I_A(x) − P(Z_u ∈ A | Z_u ∈ S_θ)) I_{S_θ}(x)`.
#[derive(Debug, Clone)]
pub struct TheoremSolution {
    family: ParametricFamily,
    set: EventSet,
    theta0: f64,
    theta: f64,
    cache: Arc<Mutex<HashMap<(u64, u64), f64>>>,
}

pub fn build_theorem_solution(
    family: &ParametricFamily,
    theta0: &[f64],
    theta: &[f64],
    set: &EventSet,
) -> Result<TheoremSolution> {
    if family.dim() != 1 {
        return Err(SteinError::Incompatible("theorem solutions follow a scalar parameter path".into()));
    }
    family.validate_theta(theta0)?;
    family.validate_theta(theta)?;
    let hood = family.neighborhood(theta0, None)[0];
    if !hood.contains(theta[0]) {
        return Err(SteinError::Input(format!(
            "theta = {} lies outside the probe neighbourhood [{}, {}] of theta0",
            theta[0], hood.lo, hood.hi
        )));
    }
    Ok(TheoremSolution {
        family: family.clone(),
        set: set.clone(),
        theta0: theta0[0],
        theta: theta[0],
        cache: Arc::new(Mutex::new(HashMap::new())),
    })
}

impl TheoremSolution {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `P(Z_u ∈ A | Z_u ∈ S_θ)`.
    fn conditional(&self, u: f64, theta: f64) -> Result<f64> {
        let key = (u.to_bits(), theta.to_bits());
        if let Some(&v) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(v);
        }
        let region = self.family.support(&[theta]);
        let denom = self.family.prob(&region, &[u])?.value;
        if denom <= 0.0 {
            return Err(SteinError::Conditioning { u });
        }
        let v = self.set.mass_within(&self.family, &[u], &region)? / denom;
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, v);
        Ok(v)
    }

    /// `f_A(x; θ')` for any `θ'` on the path.
    pub fn eval_at(&self, x: f64, theta: f64) -> Result<f64> {
        if theta == self.theta0 || !self.family.in_support(x, &[theta]) {
            return Ok(0.0);
        }
        let g = self.family.density(x, &[theta]);
        if g == 0.0 {
            return Err(SteinError::DegenerateDensity { x });
        }
        let indicator = self.set.contains(x) as u8 as f64;
        let failure: RefCell<Option<SteinError>> = RefCell::new(None);
        let integrand = |u: f64| match self.conditional(u, theta) {
            Ok(q) => (indicator - q) * self.family.density(x, &[u]),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
        let (lo, hi, sign) =
            if theta > self.theta0 { (self.theta0, theta, 1.0) } else { (theta, self.theta0, -1.0) };
        let r = integrate(integrand, Interval { lo, hi }, 1e-14, 1e-11);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(sign * r?.value / g)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_at(x, self.theta)
    }

    /// Two-argument test function `(x, θ) ↦ f_A(x; θ)`; the one-argument
    /// view is `f_A(·; θ)`.
    pub fn test_function(&self) -> TestFunction {
        let me = Arc::new(self.clone());
        let m2 = me.clone();
        TestFunction::new(format!("theorem f_A, A = {}", self.set), move |x| me.eval(x).unwrap_or(f64::NAN))
            .with_two_arg(move |x, t| m2.eval_at(x, t[0]).unwrap_or(f64::NAN))
    }
}
