//! Solutions of the Stein equation `T f = I_A − P(A)`.

mod event;
mod theorem;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, SteinError};
use crate::families::{as_int, Kind, ParametricFamily, Support};
use crate::operators::{Flavor, NamedKind, SteinOperator};
use crate::test_functions::TestFunction;

pub use event::EventSet;
pub use theorem::{build_theorem_solution, TheoremSolution};

/// A solved test function `f_A` with its residual diagnostics.
#[derive(Debug, Clone)]
pub struct SteinSolution {
    set: EventSet,
    family: ParametricFamily,
    theta0: Vec<f64>,
    target_mass: f64,
    median: f64,
    residual_grid: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionRow {
    pub x: f64,
    pub f_a: f64,
    pub residual: f64,
}

/// `f_A(x) = (1/g(x)) ∫_{lo}^{x} (I_A − P(A)) g`, anchored at the lower
/// support end.
pub fn solve_continuous(family: &ParametricFamily, theta0: &[f64], set: &EventSet) -> Result<SteinSolution> {
    if family.kind() != Kind::Continuous {
        return Err(SteinError::Incompatible("solve_continuous needs a continuous family".into()));
    }
    let mut sol = SteinSolution::bare(family, theta0, set)?;
    let op = SteinOperator::named(family.clone(), NamedKind::DensityApproach, theta0.to_vec())?;
    sol.residual_grid = sol.residual_table(&op, &default_grid(family, theta0)?)?;
    Ok(sol)
}

/// `f_0^A(x) = ψ(x)^{-1} Σ_{j<x} (I_A(j) − P(A)) g(j)`, zero at `x = 0`.
pub fn solve_discrete(family: &ParametricFamily, theta0: &[f64], set: &EventSet) -> Result<SteinSolution> {
    let op = SteinOperator::new(family.clone(), Flavor::Discrete, theta0.to_vec())?;
    let mut sol = SteinSolution::bare(family, theta0, set)?;
    sol.residual_grid = sol.residual_table(&op, &default_grid(family, theta0)?)?;
    Ok(sol)
}

pub fn solve(family: &ParametricFamily, theta0: &[f64], set: &EventSet) -> Result<SteinSolution> {
    match family.kind() {
        Kind::Continuous => solve_continuous(family, theta0, set),
        Kind::Discrete => solve_discrete(family, theta0, set),
    }
}

/// 200 equispaced points between the 1e-4 and 1 − 1e-4 quantiles, or the
/// first 50 support points and the upper end for discrete families.
pub fn default_grid(family: &ParametricFamily, theta0: &[f64]) -> Result<Vec<f64>> {
    match family.support(theta0) {
        Support::Continuous(iv) => {
            let lo = family.quantile(1e-4, theta0)?.max(iv.lo);
            let hi = family.quantile(1.0 - 1e-4, theta0)?.min(iv.hi);
            Ok((0..200).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 200.0).collect())
        }
        Support::Discrete(r) => {
            let top = r.hi.map_or(r.lo + 49, |h| h.min(r.lo + 49));
            let mut pts: Vec<f64> = (r.lo..=top).map(|k| k as f64).collect();
            if let Some(h) = r.hi {
                if h > top {
                    pts.push(h as f64);
                }
            }
            Ok(pts)
        }
    }
}

impl SteinSolution {
    fn bare(family: &ParametricFamily, theta0: &[f64], set: &EventSet) -> Result<Self> {
        family.validate_theta(theta0)?;
        let target_mass = set.mass(family, theta0)?;
        let median = family.quantile(0.5, theta0)?;
        Ok(Self {
            set: set.clone(),
            family: family.clone(),
            theta0: theta0.to_vec(),
            target_mass,
            median,
            residual_grid: vec![],
        })
    }

    pub fn set(&self) -> &EventSet {
        &self.set
    }

    pub fn family(&self) -> &ParametricFamily {
        &self.family
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    /// `P_θ0(A)`.
    pub fn target_mass(&self) -> f64 {
        self.target_mass
    }

    pub fn residual_grid(&self) -> &[(f64, f64)] {
        &self.residual_grid
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_grid.iter().map(|r| r.1.abs()).fold(0.0, f64::max)
    }

    /// `(I_A(x) − P(A)) I_S(x)`.
    pub fn l_a(&self, x: f64) -> f64 {
        if !self.family.in_support(x, &self.theta0) {
            return 0.0;
        }
        (self.set.contains(x) as u8 as f64) - self.target_mass
    }

    /// `∫_{lo}^{x} l_A g`, from whichever tail is nearer.
    fn centered_cumulative(&self, x: f64) -> Result<f64> {
        let (fam, t, p) = (&self.family, self.theta0.as_slice(), self.target_mass);
        let all = |lo: f64, hi: f64| -> Result<f64> {
            let region = match fam.kind() {
                Kind::Continuous => Support::Continuous(crate::numerics::Interval { lo, hi }),
                Kind::Discrete => Support::Discrete(crate::numerics::IntRange {
                    lo: lo.max(-4.0e15).ceil() as i64,
                    hi: hi.is_finite().then(|| hi.floor() as i64),
                }),
            };
            Ok(fam.prob(&region, t)?.value)
        };
        let below = |hi: f64| -> Result<f64> {
            Ok(self.set.mass_in_window(fam, t, f64::NEG_INFINITY, hi)? - p * all(f64::NEG_INFINITY, hi)?)
        };
        let above = |lo: f64| -> Result<f64> {
            Ok(-(self.set.mass_in_window(fam, t, lo, f64::INFINITY)? - p * all(lo, f64::INFINITY)?))
        };
        match fam.kind() {
            Kind::Continuous if x <= self.median => below(x),
            Kind::Continuous => above(x),
            // discrete: sum over j < x
            Kind::Discrete if x - 1.0 <= self.median => below(x - 1.0),
            Kind::Discrete => above(x),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.family.in_support(x, &self.theta0) {
            return Ok(0.0);
        }
        match self.family.kind() {
            Kind::Continuous => {
                let g = self.family.density(x, &self.theta0);
                if g == 0.0 {
                    return Err(SteinError::DegenerateDensity { x });
                }
                Ok(self.centered_cumulative(x)? / g)
            }
            Kind::Discrete => {
                let k = as_int(x).expect("support points are integers");
                if k <= 0 {
                    return Ok(0.0);
                }
                let psi = self.family.psi(k, &self.theta0)?;
                if psi == 0.0 {
                    return Err(SteinError::DegeneratePsi { x: k });
                }
                Ok(self.centered_cumulative(x)? / psi)
            }
        }
    }

    /// Spatial derivative from the equation itself: `l_A − f_A (log g)'`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if !self.family.support(&self.theta0).hull().contains_interior(x) {
            return Ok(0.0);
        }
        Ok(self.l_a(x) - self.eval(x)? * self.family.spatial_log_derivative(x, &self.theta0)?)
    }

    /// `f_A` as a test function for the density-approach or discrete
    /// operator (derivative attached for continuous families).
    pub fn test_function(&self) -> TestFunction {
        let me = Arc::new(self.clone());
        let label = format!("f_A, A = {}", self.set);
        let e = me.clone();
        let tf = TestFunction::new(label, move |x| e.eval(x).unwrap_or(f64::NAN));
        match self.family.kind() {
            Kind::Continuous => tf.with_derivative(move |x| me.derivative(x).unwrap_or(f64::NAN)),
            Kind::Discrete => tf,
        }
    }

    /// The test function that `op` maps to `l_A`. Location operators take
    /// `f_0(y) = −f_A(y + μ0)`; scale and the remaining named operators have
    /// no such representation and are rejected.
    pub fn test_function_for(&self, op: &SteinOperator) -> Result<TestFunction> {
        if op.family().name() != self.family.name() || op.theta0() != self.theta0.as_slice() {
            return Err(SteinError::Incompatible("operator and solution use different targets".into()));
        }
        let mu = op.theta0()[0];
        let me = Arc::new(self.clone());
        let label = format!("f_A, A = {}", self.set);
        let shifted = |sign: f64| {
            let (a, b) = (me.clone(), me.clone());
            TestFunction::new(label.clone(), move |y| sign * a.eval(y + mu).unwrap_or(f64::NAN))
                .with_derivative(move |y| sign * b.derivative(y + mu).unwrap_or(f64::NAN))
        };
        match (op.flavor(), op.named_kind()) {
            (Flavor::Location, _) => Ok(shifted(-1.0)),
            (Flavor::Named, Some(NamedKind::UniformLocation)) => Ok(shifted(1.0)),
            (Flavor::Named, Some(NamedKind::DensityApproach)) | (Flavor::Discrete, _) => Ok(self.test_function()),
            _ => Err(SteinError::Incompatible(format!(
                "no closed solution representation for the {} operator",
                op.flavor()
            ))),
        }
    }

    fn residual_table(&self, op: &SteinOperator, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        // residuals use a difference quotient, not the attached derivative
        let tf = self.test_function_for(op)?.without_derivative();
        grid.iter()
            .map(|&x| {
                let r = op.apply(&tf, x)? - self.l_a(x);
                Ok((x, r))
            })
            .collect()
    }

    /// `max |T f_A − l_A|` over `grid`.
    pub fn residual(&self, op: &SteinOperator, grid: &[f64]) -> Result<f64> {
        Ok(self.residual_table(op, grid)?.iter().map(|r| r.1.abs()).fold(0.0, f64::max))
    }

    /// Sampled table of `x, f_A(x), residual` over the stored residual grid.
    pub fn rows(&self) -> Result<Vec<SolutionRow>> {
        self.residual_grid.iter().map(|&(x, r)| Ok(SolutionRow { x, f_a: self.eval(x)?, residual: r })).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["x", "f_A", "residual"]).map_err(|e| SteinError::Input(e.to_string()))?;
        for r in self.rows()? {
            w.write_record([format!("{:.12e}", r.x), format!("{:.12e}", r.f_a), format!("{:.6e}", r.residual)])
                .map_err(|e| SteinError::Input(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| SteinError::Input(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests;
