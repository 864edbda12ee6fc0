use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::{integrate_mass, sum_mass, CustomModel, Kind, ParamSpace, ParametricFamily, Structure, Support};
use crate::error::{Result, SteinError};
use crate::numerics::{IntRange, Interval};

/// Builder for families defined by Rust closures.
///
/// ```
/// use steinforge::families::{CustomFamilyBuilder, Kind, ParamSpace, Support, Structure};
/// use steinforge::numerics::Interval;
///
/// let laplace = CustomFamilyBuilder::new("laplace_loc", Kind::Continuous, ParamSpace::real_line(1))
///     .structure(Structure::Location)
///     .density(|x, t| 0.5 * (-(x - t[0]).abs()).exp())
///     .support(|_| Support::Continuous(Interval::real_line()))
///     .param_score(|x, t| vec![(x - t[0]).signum()])
///     .build()
///     .unwrap();
/// assert_eq!(laplace.density(0.0, &[0.0]), 0.5);
/// ```
pub struct CustomFamilyBuilder {
    name: String,
    kind: Kind,
    structure: Structure,
    param_space: ParamSpace,
    theta0: Option<Vec<f64>>,
    density: Option<super::DensityFn>,
    support: Option<super::SupportFn>,
    score: Option<super::ScoreFn>,
    quantile: Option<super::QuantileFn>,
}

impl ParamSpace {
    pub fn new(bounds: Vec<Interval>) -> Self {
        Self { dim: bounds.len(), bounds }
    }

    pub fn real_line(dim: usize) -> Self {
        Self::new(vec![Interval::real_line(); dim])
    }
}

impl CustomFamilyBuilder {
    pub fn new(name: impl Into<String>, kind: Kind, param_space: ParamSpace) -> Self {
        Self {
            name: name.into(),
            kind,
            structure: if kind == Kind::Discrete { Structure::Discrete } else { Structure::Other },
            param_space,
            theta0: None,
            density: None,
            support: None,
            score: None,
            quantile: None,
        }
    }

    pub fn structure(mut self, s: Structure) -> Self {
        self.structure = s;
        self
    }

    pub fn theta0(mut self, t: Vec<f64>) -> Self {
        self.theta0 = Some(t);
        self
    }

    pub fn density(mut self, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.density = Some(Arc::new(f));
        self
    }

    pub fn support(mut self, f: impl Fn(&[f64]) -> Support + Send + Sync + 'static) -> Self {
        self.support = Some(Arc::new(f));
        self
    }

    pub fn param_score(mut self, f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.score = Some(Arc::new(f));
        self
    }

    /// Inverse CDF, which also enables sampling.
    pub fn quantile(mut self, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.quantile = Some(Arc::new(f));
        self
    }

    /// Validates the pieces and checks normalization at θ0.
    pub fn build(self) -> Result<ParametricFamily> {
        let name = self.name;
        if self.param_space.dim == 0 || self.param_space.bounds.len() != self.param_space.dim {
            return Err(SteinError::param(&name, "parameter space needs one interval per coordinate"));
        }
        if self.param_space.bounds.iter().any(|b| b.lo >= b.hi) {
            return Err(SteinError::param(&name, "parameter intervals need non-empty interior"));
        }
        let density = self.density.ok_or_else(|| SteinError::param(&name, "density missing"))?;
        let support = self.support.ok_or_else(|| SteinError::param(&name, "support missing"))?;
        let theta0 = match self.theta0 {
            Some(t) => t,
            None => self.param_space.bounds.iter().map(default_point).collect(),
        };
        let fam = ParametricFamily::from_custom(
            name,
            self.kind,
            self.structure,
            self.param_space,
            theta0.clone(),
            CustomModel { density, support, score: self.score, quantile: self.quantile },
        );
        fam.validate_theta(&theta0)?;
        let kind_ok = matches!(
            (fam.kind(), fam.support(&theta0)),
            (Kind::Continuous, Support::Continuous(_)) | (Kind::Discrete, Support::Discrete(_))
        );
        if !kind_ok {
            return Err(SteinError::param(fam.name(), "support kind does not match the family kind"));
        }
        let defect = normalization_defect(&fam, &theta0)?;
        if defect > 1e-8 {
            return Err(SteinError::param(fam.name(), format!("density integrates to 1 {defect:+e} at theta0")));
        }
        Ok(fam)
    }
}

fn default_point(b: &Interval) -> f64 {
    match (b.lo.is_finite(), b.hi.is_finite()) {
        (true, true) => 0.5 * (b.lo + b.hi),
        (true, false) => b.lo + 1.0,
        (false, true) => b.hi - 1.0,
        (false, false) => 0.0,
    }
}

/// `|∫ g(·; θ) − 1|` (or the summed analogue).
pub(crate) fn normalization_defect(fam: &ParametricFamily, theta: &[f64]) -> Result<f64> {
    let total = match fam.support(theta) {
        Support::Continuous(iv) => integrate_mass(|x| fam.density(x, theta), iv)?.value,
        Support::Discrete(r) => sum_mass(|k| fam.density(k as f64, theta), r)?.value,
    };
    Ok((total - 1.0).abs())
}

/// One end of an interval in a descriptor: a number, an expression in
/// `theta`, or `null` for an infinite end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Number(f64),
    Expression(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    #[serde(default)]
    pub lo: Option<BoundSpec>,
    #[serde(default)]
    pub hi: Option<BoundSpec>,
}

/// JSON description of a custom family.
///
/// Expressions may use `x`, `theta` (first parameter coordinate), `theta2`,
/// `theta3`, ... and every entry of `params` by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDescriptor {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub support: IntervalSpec,
    #[serde(default)]
    pub density_expression: Option<String>,
    #[serde(default)]
    pub score_expression: Option<String>,
    #[serde(default)]
    pub structure: Option<Structure>,
    #[serde(default)]
    pub param_space: Option<Vec<IntervalSpec>>,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
}

fn theta_names(dim: usize) -> Vec<String> {
    let mut names = vec!["x".to_string(), "theta".to_string()];
    names.extend((2..=dim).map(|i| format!("theta{i}")));
    names
}

enum Bound {
    Fixed(f64),
    Computed(Expr),
}

impl Bound {
    fn at(&self, slots: &[f64]) -> f64 {
        match self {
            Bound::Fixed(v) => *v,
            Bound::Computed(e) => e.eval(slots),
        }
    }
}

impl FamilyDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SteinError::Input(format!("family descriptor: {e}")))
    }

    /// Compiles the expressions into a family.
    pub fn build(&self) -> Result<ParametricFamily> {
        let bad = |reason: String| SteinError::param(&self.name, reason);
        let space = match &self.param_space {
            None => ParamSpace::real_line(1),
            Some(list) => ParamSpace::new(
                list.iter()
                    .map(|s| {
                        let end = |b: &Option<BoundSpec>, inf: f64| match b {
                            None => Ok(inf),
                            Some(BoundSpec::Number(v)) => Ok(*v),
                            Some(BoundSpec::Expression(_)) => Err(bad("parameter bounds must be numbers".into())),
                        };
                        Ok(Interval { lo: end(&s.lo, f64::NEG_INFINITY)?, hi: end(&s.hi, f64::INFINITY)? })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let names = theta_names(space.dim);
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        let compile = |src: &str| Expr::compile(src, &vars, &self.params).map_err(|e| bad(format!("{src:?}: {e}")));
        let bound = |b: &Option<BoundSpec>, inf: f64| -> Result<Bound> {
            Ok(match b {
                None => Bound::Fixed(inf),
                Some(BoundSpec::Number(v)) => Bound::Fixed(*v),
                Some(BoundSpec::Expression(s)) => {
                    let e = compile(s)?;
                    if !e.ignores(0) {
                        return Err(bad("support bounds may not depend on x".into()));
                    }
                    Bound::Computed(e)
                }
            })
        };
        let lo = bound(&self.support.lo, f64::NEG_INFINITY)?;
        let hi = bound(&self.support.hi, f64::INFINITY)?;
        let density_src = self
            .density_expression
            .as_deref()
            .ok_or_else(|| SteinError::Capability(format!("descriptor {} has no density_expression", self.name)))?;
        let density = compile(density_src)?;
        let score = self.score_expression.as_deref().map(compile).transpose()?;
        if score.is_some() && space.dim != 1 {
            return Err(bad("score_expression is only supported for one parameter".into()));
        }

        let kind = self.kind;
        let slots = |x: f64, t: &[f64]| {
            let mut s = Vec::with_capacity(t.len() + 1);
            s.push(x);
            s.extend_from_slice(t);
            s
        };
        let mut b = CustomFamilyBuilder::new(self.name.clone(), kind, space)
            .density(move |x, t| density.eval(&slots(x, t)))
            .support(move |t| {
                let s = slots(0.0, t);
                let (l, h) = (lo.at(&s), hi.at(&s));
                match kind {
                    Kind::Continuous => Support::Continuous(Interval { lo: l, hi: h }),
                    Kind::Discrete => Support::Discrete(IntRange {
                        lo: l.ceil().max(-9.0e15) as i64,
                        hi: h.is_finite().then(|| h.floor() as i64),
                    }),
                }
            });
        if let Some(score) = score {
            b = b.param_score(move |x, t| vec![score.eval(&slots(x, t))]);
        }
        if let Some(s) = self.structure {
            b = b.structure(s);
        }
        if let Some(t) = &self.theta0 {
            b = b.theta0(t.clone());
        }
        b.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAPLACE: &str = r#"{
        "name": "laplace_loc",
        "kind": "continuous",
        "params": {"b": 1.0},
        "support": {"lo": null, "hi": null},
        "density_expression": "exp(-abs(x - theta) / b) / (2 * b)",
        "structure": "location"
    }"#;

    #[test]
    fn laplace_descriptor_builds() {
        let fam = FamilyDescriptor::from_json(LAPLACE).unwrap().build().unwrap();
        assert_eq!(fam.density(0.0, &[0.0]), 0.5);
        assert_eq!(fam.structure(), Structure::Location);
        let s = fam.param_score(2.0, &[0.0]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn theta_dependent_support() {
        let json = r#"{
            "name": "shifted_exp",
            "kind": "continuous",
            "support": {"lo": "theta", "hi": null},
            "density_expression": "exp(-(x - theta))"
        }"#;
        let fam = FamilyDescriptor::from_json(json).unwrap().build().unwrap();
        assert_eq!(fam.density(-0.5, &[0.0]), 0.0);
        assert!(fam.in_support(1.5, &[1.0]));
        assert!(!fam.in_support(0.5, &[1.0]));
    }

    #[test]
    fn discrete_descriptor() {
        let json = r#"{
            "name": "geom_custom",
            "kind": "discrete",
            "support": {"lo": 0, "hi": null},
            "density_expression": "theta * (1 - theta)^x",
            "param_space": [{"lo": 0, "hi": 1}],
            "theta0": [0.5]
        }"#;
        let fam = FamilyDescriptor::from_json(json).unwrap().build().unwrap();
        assert_eq!(fam.density(1.0, &[0.5]), 0.25);
        assert_eq!(fam.density(1.5, &[0.5]), 0.0);
        let psi = fam.psi(1, &[0.5]).unwrap();
        assert!((psi + 1.0).abs() < 1e-8);
    }

    #[test]
    fn unnormalized_density_rejected() {
        let json = r#"{
            "name": "bad",
            "kind": "continuous",
            "support": {"lo": 0, "hi": 1},
            "density_expression": "2"
        }"#;
        assert!(FamilyDescriptor::from_json(json).unwrap().build().is_err());
    }

    #[test]
    fn unknown_fields_and_missing_density() {
        assert!(FamilyDescriptor::from_json(r#"{"name":"a","kind":"continuous","support":{},"bogus":1}"#).is_err());
        let d = FamilyDescriptor::from_json(r#"{"name":"a","kind":"continuous","support":{}}"#).unwrap();
        assert!(matches!(d.build(), Err(SteinError::Capability(_))));
    }

    #[test]
    fn support_may_not_use_x() {
        let json = r#"{"name":"a","kind":"continuous","support":{"lo":"x"},"density_expression":"1"}"#;
        assert!(FamilyDescriptor::from_json(json).unwrap().build().is_err());
    }
}
