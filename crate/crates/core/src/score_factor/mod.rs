//! Generalized standardized scores between two families sharing a support,
//! and the factorization `T(f,p) = T(f,q) + f·r` of the parameter operator.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, SteinError};
use crate::families::{CustomFamilyBuilder, Kind, ParamSpace, ParametricFamily, Structure, Support};
use crate::numerics::Interval;
use crate::operators::{Flavor, SteinOperator};
use crate::test_functions::TestFunction;

/// Two families compared at a common `θ0`, optionally on a restriction of
/// their supports.
#[derive(Debug, Clone)]
pub struct ScorePair {
    p: ParametricFamily,
    q: ParametricFamily,
    theta0: Vec<f64>,
    domain: Support,
}

impl ScorePair {
    /// Requires `S_θ0(p) = S_θ0(q)`.
    pub fn new(p: ParametricFamily, q: ParametricFamily, theta0: Vec<f64>) -> Result<Self> {
        Self::check_params(&p, &q, &theta0)?;
        let (sp, sq) = (p.support(&theta0), q.support(&theta0));
        if sp != sq {
            return Err(SteinError::Incompatible(format!(
                "{} and {} have different supports at theta0; restrict to a common interval",
                p.name(),
                q.name()
            )));
        }
        Ok(Self { p, q, theta0, domain: sp })
    }

    /// Compares on `restriction`, which must lie inside both supports.
    pub fn restricted(p: ParametricFamily, q: ParametricFamily, theta0: Vec<f64>, restriction: Interval) -> Result<Self> {
        Self::check_params(&p, &q, &theta0)?;
        if p.kind() != Kind::Continuous || q.kind() != Kind::Continuous {
            return Err(SteinError::Incompatible("restrictions apply to continuous families".into()));
        }
        let domain = Support::Continuous(restriction);
        if !domain.is_subset_of(&p.support(&theta0)) || !domain.is_subset_of(&q.support(&theta0)) {
            return Err(SteinError::Incompatible(format!(
                "restriction [{}, {}] is not inside both supports",
                restriction.lo, restriction.hi
            )));
        }
        Ok(Self { p, q, theta0, domain })
    }

    /// Location pair at `μ0`: both families must be location families.
    pub fn location(p: ParametricFamily, q: ParametricFamily, mu0: f64) -> Result<Self> {
        if p.structure() != Structure::Location || q.structure() != Structure::Location {
            return Err(SteinError::Incompatible("location pairs need two location families".into()));
        }
        Self::new(p, q, vec![mu0])
    }

    fn check_params(p: &ParametricFamily, q: &ParametricFamily, theta0: &[f64]) -> Result<()> {
        if p.dim() != q.dim() {
            return Err(SteinError::Incompatible("families have different parameter dimensions".into()));
        }
        p.validate_theta(theta0)?;
        q.validate_theta(theta0)
    }

    pub fn p(&self) -> &ParametricFamily {
        &self.p
    }

    pub fn q(&self) -> &ParametricFamily {
        &self.q
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn domain(&self) -> Support {
        self.domain
    }

    /// The pair with `p` and `q` exchanged.
    pub fn swapped(&self) -> Self {
        Self { p: self.q.clone(), q: self.p.clone(), theta0: self.theta0.clone(), domain: self.domain }
    }

    /// `r(x) = ∂_θ p / p − ∂_θ q / q` at `θ0`.
    pub fn generalized_score(&self, x: f64) -> Result<Vec<f64>> {
        if !self.domain.contains(x) {
            return Err(SteinError::OutsideSupport { x });
        }
        let sp = self.p.param_score(x, &self.theta0)?;
        let sq = self.q.param_score(x, &self.theta0)?;
        Ok(sp.iter().zip(&sq).map(|(a, b)| a - b).collect())
    }

    /// Pointwise `T(f,p) − T(f,q) − f·r` over `grid`, using the parameter
    /// operator of each family and `f`'s two-argument form.
    pub fn factorization(&self, f: &TestFunction, grid: &[f64]) -> Result<FactorizationReport> {
        let two = f
            .two_arg()
            .cloned()
            .ok_or_else(|| SteinError::Capability(format!("test function {} has no two-argument form", f.label())))?;
        let op_p = SteinOperator::new(self.p.clone(), Flavor::Generic, self.theta0.clone())?;
        let op_q = SteinOperator::new(self.q.clone(), Flavor::Generic, self.theta0.clone())?;
        let mut rows = Vec::with_capacity(grid.len());
        let mut failures = vec![];
        for &x in grid {
            let row = (|| -> Result<FactorRow> {
                let r = self.generalized_score(x)?;
                let tp = op_p.generic_apply_two_arg(&two, x)?;
                let tq = op_q.generic_apply_two_arg(&two, x)?;
                let fx = two(x, &self.theta0);
                let deviation = (0..r.len()).map(|j| (tp[j] - tq[j] - fx * r[j]).abs()).fold(0.0, f64::max);
                Ok(FactorRow { x, r, t_p: tp, t_q: tq, f: fx, deviation })
            })();
            match row {
                Ok(row) => rows.push(row),
                Err(e) => failures.push(PointFailure { x, error: e.to_string() }),
            }
        }
        let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
        Ok(FactorizationReport {
            p: self.p.label(),
            q: self.q.label(),
            theta0: self.theta0.clone(),
            test_function: f.label().to_string(),
            max_deviation,
            rows,
            failures,
        })
    }

    /// `max |T(f,p) − T(f,q) − f·r|` over the grid points that evaluate.
    pub fn factorization_check(&self, f: &TestFunction, grid: &[f64]) -> Result<f64> {
        Ok(self.factorization(f, grid)?.max_deviation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorRow {
    pub x: f64,
    pub r: Vec<f64>,
    pub t_p: Vec<f64>,
    pub t_q: Vec<f64>,
    pub f: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub x: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub p: String,
    pub q: String,
    pub theta0: Vec<f64>,
    pub test_function: String,
    pub max_deviation: f64,
    pub rows: Vec<FactorRow>,
    pub failures: Vec<PointFailure>,
}

/// `f(x; μ) = f_0(x − μ)`, viewed at `μ0`.
pub fn location_form(f0: &TestFunction, mu0: f64) -> TestFunction {
    let g = f0.clone();
    TestFunction::from_two_arg(format!("{} (location form)", f0.label()), vec![mu0], Arc::new(move |x, t| g.eval(x - t[0])))
}

/// `f(x; σ) = f_0(σ x)`, viewed at `σ0`.
pub fn scale_form(f0: &TestFunction, sigma0: f64) -> TestFunction {
    let g = f0.clone();
    TestFunction::from_two_arg(format!("{} (scale form)", f0.label()), vec![sigma0], Arc::new(move |x, t| g.eval(t[0] * x)))
}

/// Laplace location family `½ e^{−|x−μ|}` on the real line.
pub fn laplace_loc() -> Result<ParametricFamily> {
    CustomFamilyBuilder::new("laplace_loc", Kind::Continuous, ParamSpace::real_line(1))
        .structure(Structure::Location)
        .theta0(vec![0.0])
        .density(|x, t| 0.5 * (-(x - t[0]).abs()).exp())
        .support(|_| Support::Continuous(Interval::real_line()))
        .param_score(|x, t| {
            let d = x - t[0];
            vec![if d == 0.0 { 0.0 } else { d.signum() }]
        })
        .quantile(|u, t| if u < 0.5 { t[0] + (2.0 * u).ln() } else { t[0] - (2.0 * (1.0 - u)).ln() })
        .build()
}
