//! θ-parametric density families: builtin catalog, custom registration,
//! parameter scores and the numeric assumption checks.

mod assumptions;
mod builtin;
mod catalog;
mod custom;
mod expr;

use std::fmt;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use assumptions::{check_assumption, Assumption, AssumptionReport, ProbeSpec};
pub use catalog::{builtin, list_families, lookup, register, FamilyInfo, BUILTIN_NAMES};
pub use custom::{CustomFamilyBuilder, FamilyDescriptor};
pub use expr::{Expr, ExprError};

pub(crate) use builtin::{as_int, precision_matrix, Builtin};
#[cfg(test)]
pub(crate) use builtin::std_normal_pdf;

use crate::error::{Result, SteinError};
use crate::numerics::{central_diff, integrate, sum_series, IntRange, Interval, NumericError, NumericReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Continuous,
    Discrete,
}

/// How θ enters the density; selects the specialised operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// `g(x; μ) = g0(x − μ)`
    Location,
    /// `g(x; σ) = σ g0(σ x)`
    Scale,
    /// integer support `[N]` not depending on θ
    Discrete,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Continuous(Interval),
    Discrete(IntRange),
}

impl Support {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            Support::Continuous(iv) => iv.contains(x),
            Support::Discrete(r) => as_int(x).is_some_and(|k| r.contains(k)),
        }
    }

    /// The support as a real interval (integer endpoints for discrete).
    pub fn hull(&self) -> Interval {
        match *self {
            Support::Continuous(iv) => iv,
            Support::Discrete(r) => Interval { lo: r.lo as f64, hi: r.hi.map_or(f64::INFINITY, |h| h as f64) },
        }
    }

    pub fn is_subset_of(&self, other: &Support) -> bool {
        let (a, b) = (self.hull(), other.hull());
        a.lo >= b.lo && a.hi <= b.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub dim: usize,
    /// one open interval per coordinate
    pub bounds: Vec<Interval>,
}

impl ParamSpace {
    pub fn contains_interior(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim && theta.iter().zip(&self.bounds).all(|(t, b)| b.contains_interior(*t))
    }
}

/// Default neighbourhood radius around `theta0`.
pub fn default_radius(theta0: f64) -> f64 {
    0.1f64.max(0.1 * theta0.abs())
}

pub(crate) type DensityFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub(crate) type SupportFn = Arc<dyn Fn(&[f64]) -> Support + Send + Sync>;
pub(crate) type ScoreFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
pub(crate) type QuantileFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub(crate) struct CustomModel {
    pub density: DensityFn,
    pub support: SupportFn,
    pub score: Option<ScoreFn>,
    pub quantile: Option<QuantileFn>,
}

#[derive(Clone)]
enum Model {
    Builtin(Arc<builtin::Builtin>),
    Custom(Arc<CustomModel>),
}

/// A density `g(x; θ)` with its support `S_θ` and parameter space `Θ`.
///
/// Values are immutable and cheap to clone.
#[derive(Clone)]
pub struct ParametricFamily {
    name: String,
    params: Vec<f64>,
    kind: Kind,
    structure: Structure,
    param_space: ParamSpace,
    theta0: Vec<f64>,
    model: Model,
}

impl fmt::Debug for ParametricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricFamily")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("kind", &self.kind)
            .field("structure", &self.structure)
            .finish_non_exhaustive()
    }
}

impl ParametricFamily {
    pub(crate) fn from_builtin(name: &str, params: &[f64]) -> Result<Self> {
        let spec = builtin::build(name, params)?;
        Ok(Self {
            name: name.to_string(),
            params: spec.params,
            kind: spec.kind,
            structure: spec.structure,
            param_space: spec.param_space,
            theta0: vec![spec.theta0],
            model: Model::Builtin(Arc::new(spec.model)),
        })
    }

    pub(crate) fn from_custom(
        name: String,
        kind: Kind,
        structure: Structure,
        param_space: ParamSpace,
        theta0: Vec<f64>,
        model: CustomModel,
    ) -> Self {
        Self { name, params: vec![], kind, structure, param_space, theta0, model: Model::Custom(Arc::new(model)) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Human-readable label, e.g. `binomial_p[10]`.
    pub fn label(&self) -> String {
        if self.params.is_empty() {
            self.name.clone()
        } else {
            let p: Vec<String> = self.params.iter().map(|v| format!("{v}")).collect();
            format!("{}[{}]", self.name, p.join(","))
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn param_space(&self) -> &ParamSpace {
        &self.param_space
    }

    pub fn dim(&self) -> usize {
        self.param_space.dim
    }

    pub fn default_theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self.model, Model::Builtin(_))
    }

    pub(crate) fn builtin_model(&self) -> Option<&builtin::Builtin> {
        match &self.model {
            Model::Builtin(b) => Some(b),
            Model::Custom(_) => None,
        }
    }

    pub fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(SteinError::param(
                &self.name,
                format!("theta has {} coordinates, expected {}", theta.len(), self.dim()),
            ));
        }
        if !self.param_space.contains_interior(theta) {
            return Err(SteinError::param(&self.name, format!("theta = {theta:?} is not interior to the parameter space")));
        }
        Ok(())
    }

    pub fn support(&self, theta: &[f64]) -> Support {
        match &self.model {
            Model::Builtin(b) => b.support(theta[0]),
            Model::Custom(c) => (c.support)(theta),
        }
    }

    pub fn in_support(&self, x: f64, theta: &[f64]) -> bool {
        self.support(theta).contains(x)
    }

    /// `g(x; θ)`; exactly 0 off the support.
    pub fn density(&self, x: f64, theta: &[f64]) -> f64 {
        match &self.model {
            Model::Builtin(b) => b.density(x, theta[0]),
            Model::Custom(c) => {
                if (c.support)(theta).contains(x) {
                    (c.density)(x, theta)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∂_θ g(x; θ) / g(x; θ)`.
    pub fn param_score(&self, x: f64, theta: &[f64]) -> Result<Vec<f64>> {
        if !self.in_support(x, theta) {
            return Err(SteinError::OutsideSupport { x });
        }
        let g = self.density(x, theta);
        if g <= 0.0 {
            return Err(SteinError::DegenerateDensity { x });
        }
        match &self.model {
            Model::Builtin(b) => Ok(vec![b.param_score(x, theta[0])]),
            Model::Custom(c) => match &c.score {
                Some(s) => Ok(s(x, theta)),
                None => self.numeric_param_score(x, theta, g),
            },
        }
    }

    pub(crate) fn numeric_param_score(&self, x: f64, theta: &[f64], g: f64) -> Result<Vec<f64>> {
        (0..theta.len())
            .map(|j| {
                let d = central_diff(
                    |u| {
                        let mut t = theta.to_vec();
                        t[j] = u;
                        self.density(x, &t)
                    },
                    theta[j],
                    0.0,
                )?;
                Ok(d / g)
            })
            .collect()
    }

    /// `∂_x log g(x; θ)` on the support interior.
    pub fn spatial_log_derivative(&self, x: f64, theta: &[f64]) -> Result<f64> {
        if self.kind == Kind::Discrete {
            return Err(SteinError::Incompatible("spatial derivative of a discrete family".into()));
        }
        if !self.in_support(x, theta) {
            return Err(SteinError::OutsideSupport { x });
        }
        let v = match &self.model {
            Model::Builtin(b) => b.spatial_log_derivative(x, theta[0]).unwrap_or(f64::NAN),
            Model::Custom(_) => {
                let g = self.density(x, theta);
                if g <= 0.0 {
                    return Err(SteinError::DegenerateDensity { x });
                }
                central_diff(|z| self.density(z, theta), x, 0.0)? / g
            }
        };
        if !v.is_finite() {
            return Err(SteinError::Boundary { x });
        }
        Ok(v)
    }

    /// `ψ(x; θ) = ∂_u (g(x; u) / g(0; u))` at `u = θ` (first coordinate).
    pub fn psi(&self, x: i64, theta: &[f64]) -> Result<f64> {
        if self.kind != Kind::Discrete {
            return Err(SteinError::Incompatible("psi is defined for discrete families only".into()));
        }
        if let Some(b) = self.builtin_model() {
            if let Some(v) = b.psi(x, theta[0]) {
                return Ok(v);
            }
        }
        if x == 0 {
            return Ok(0.0);
        }
        let xf = x as f64;
        Ok(central_diff(
            |u| {
                let mut t = theta.to_vec();
                t[0] = u;
                let g0 = self.density(0.0, &t);
                if g0 > 0.0 {
                    self.density(xf, &t) / g0
                } else {
                    f64::NAN
                }
            },
            theta[0],
            0.0,
        )?)
    }

    /// Inverse CDF; `u` in (0, 1).
    pub fn quantile(&self, u: f64, theta: &[f64]) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(SteinError::Input(format!("quantile level {u} not in (0,1)")));
        }
        match &self.model {
            Model::Builtin(b) => Ok(b.quantile(u, theta[0])),
            Model::Custom(c) => match &c.quantile {
                Some(q) => Ok(q(u, theta)),
                None => self.numeric_quantile(u, theta),
            },
        }
    }

    pub fn has_sampler(&self) -> bool {
        match &self.model {
            Model::Builtin(_) => true,
            Model::Custom(c) => c.quantile.is_some(),
        }
    }

    /// One draw by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, theta: &[f64]) -> Result<f64> {
        let u: f64 = rng.sample(Open01);
        match &self.model {
            Model::Builtin(b) => Ok(b.quantile(u, theta[0])),
            Model::Custom(c) => match &c.quantile {
                Some(q) => Ok(q(u, theta)),
                None => Err(SteinError::Capability(format!("family {} has no sampler", self.name))),
            },
        }
    }

    /// `P_θ(X ∈ region)`, computed with relative accuracy so that tail
    /// masses stay meaningful.
    pub fn prob(&self, region: &Support, theta: &[f64]) -> Result<NumericReport> {
        match (*region, self.support(theta)) {
            (Support::Continuous(iv), Support::Continuous(s)) => match iv.intersect(&s) {
                Some(dom) if dom.lo < dom.hi => integrate_mass(|x| self.density(x, theta), dom),
                _ => Ok(zero_report()),
            },
            (Support::Discrete(r), Support::Discrete(s)) => match r.intersect(&s) {
                Some(dom) => sum_mass(|k| self.density(k as f64, theta), dom),
                None => Ok(zero_report()),
            },
            _ => Err(SteinError::Incompatible("region kind does not match the family kind".into())),
        }
    }

    fn numeric_quantile(&self, u: f64, theta: &[f64]) -> Result<f64> {
        match self.support(theta) {
            Support::Discrete(r) => {
                let mut acc = 0.0;
                let mut k = r.lo;
                loop {
                    acc += self.density(k as f64, theta);
                    if acc >= u || r.hi.is_some_and(|h| k >= h) || k - r.lo > 10_000_000 {
                        return Ok(k as f64);
                    }
                    k += 1;
                }
            }
            Support::Continuous(s) => {
                let cdf = |x: f64| -> Result<f64> {
                    Ok(self.prob(&Support::Continuous(Interval { lo: f64::NEG_INFINITY, hi: x }), theta)?.value)
                };
                let (mut lo, mut hi) = (s.lo, s.hi);
                let mut step = 1.0;
                if !lo.is_finite() {
                    lo = if hi.is_finite() { hi - 1.0 } else { -1.0 };
                    while cdf(lo)? > u {
                        lo -= step;
                        step *= 2.0;
                    }
                }
                step = 1.0;
                if !hi.is_finite() {
                    hi = lo.max(0.0) + 1.0;
                    while cdf(hi)? < u {
                        hi += step;
                        step *= 2.0;
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi || hi - lo < 1e-12 * (1.0 + mid.abs()) {
                        break;
                    }
                    if cdf(mid)? < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// Quantile-spaced probe points strictly inside the support of `g(·; θ)`.
    pub(crate) fn probe_points(&self, theta: &[f64], count: usize) -> Result<Vec<f64>> {
        match self.support(theta) {
            Support::Discrete(r) => {
                let hi = match r.hi {
                    Some(h) => h,
                    None => self.quantile(0.999, theta)?.max(r.lo as f64 + 5.0) as i64,
                };
                let n = (hi - r.lo + 1).max(1) as usize;
                let step = (n as f64 / count as f64).max(1.0);
                let mut pts: Vec<f64> = (0..count.min(n)).map(|i| r.lo as f64 + (i as f64 * step).floor()).collect();
                pts.dedup();
                Ok(pts)
            }
            Support::Continuous(_) => (0..count)
                .map(|i| {
                    let u = 0.02 + 0.96 * (i as f64 + 0.5) / count as f64;
                    self.quantile(u, theta)
                })
                .collect(),
        }
    }

    /// Probe neighbourhood of `theta0` clipped inside the parameter space.
    pub(crate) fn neighborhood(&self, theta0: &[f64], radius: Option<f64>) -> Vec<Interval> {
        theta0
            .iter()
            .zip(&self.param_space.bounds)
            .map(|(&t, b)| {
                let mut r = radius.unwrap_or_else(|| default_radius(t));
                let room = (t - b.lo).min(b.hi - t);
                if room.is_finite() {
                    r = r.min(0.9 * room);
                }
                Interval { lo: t - r, hi: t + r }
            })
            .collect()
    }
}

fn zero_report() -> NumericReport {
    NumericReport { value: 0.0, abs_error_estimate: 0.0, evaluations: 1 }
}

/// Integral of a non-negative density piece to (mostly) relative accuracy.
pub(crate) fn integrate_mass<F: Fn(f64) -> f64>(f: F, dom: Interval) -> Result<NumericReport> {
    match integrate(&f, dom, 1e-300, 1e-12) {
        Ok(r) => Ok(r),
        Err(NumericError::Divergence { .. }) => match integrate(&f, dom, 1e-14, 1e-9) {
            Ok(r) => Ok(r),
            // integrable endpoint singularities stall at float resolution
            Err(NumericError::Divergence { partial, .. })
                if partial.abs_error_estimate <= 1e-6 * partial.value.abs().max(1e-300) =>
            {
                Ok(partial)
            }
            Err(e) => Err(e.into()),
        },
        Err(e) => Err(e.into()),
    }
}

/// Sum of a non-negative mass function with a stopping rule relative to
/// the leading term.
pub(crate) fn sum_mass<F: Fn(i64) -> f64>(f: F, dom: IntRange) -> Result<NumericReport> {
    let lead = f(dom.lo).abs();
    let tol = (lead * 1e-17).max(1e-300);
    Ok(sum_series(f, dom, tol)?)
}
