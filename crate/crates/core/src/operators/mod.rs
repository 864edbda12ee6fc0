//! Pointwise Stein operators: the parameter-derivative operator and the
//! location, scale, discrete and named closed forms.

mod multivariate;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, SteinError};
use crate::families::{as_int, lookup, Kind, ParametricFamily, Structure, Support};
use crate::numerics::{central_diff, central_step};
use crate::test_functions::{TestFunction, TwoArg};

pub use multivariate::multivariate_gaussian_apply;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Generic,
    Location,
    Scale,
    Discrete,
    Named,
}

impl std::str::FromStr for Flavor {
    type Err = SteinError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "generic" => Flavor::Generic,
            "location" => Flavor::Location,
            "scale" => Flavor::Scale,
            "discrete" => Flavor::Discrete,
            "named" => Flavor::Named,
            other => return Err(SteinError::Input(format!("unknown flavor {other:?}"))),
        })
    }
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Flavor::Generic => "generic",
            Flavor::Location => "location",
            Flavor::Scale => "scale",
            Flavor::Discrete => "discrete",
            Flavor::Named => "named",
        };
        f.write_str(s)
    }
}

/// Operators with a fixed printed closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedKind {
    /// endpoint `a` of the uniform law on `[a, b]`
    UniformA,
    /// `f_0'(x)` with boundary functional `f_0(b-) - f_0(a+)`
    UniformLocation,
    StudentNu,
    MultinomialSlice,
    /// `F' + F (log g)'` for any continuous target, no parameter involved
    DensityApproach,
}

/// Flavor picked when none is requested.
pub fn default_flavor(family: &ParametricFamily) -> Flavor {
    match family.name() {
        "uniform_a" | "student_nu" => return Flavor::Named,
        _ => {}
    }
    match family.structure() {
        Structure::Location => Flavor::Location,
        Structure::Scale => Flavor::Scale,
        Structure::Discrete => Flavor::Discrete,
        Structure::Other => Flavor::Generic,
    }
}

fn default_named(family: &ParametricFamily) -> Option<NamedKind> {
    match family.name() {
        "uniform_a" => Some(NamedKind::UniformA),
        "uniform_loc" => Some(NamedKind::UniformLocation),
        "student_nu" => Some(NamedKind::StudentNu),
        "multinomial_p1_slice" => Some(NamedKind::MultinomialSlice),
        _ if family.kind() == Kind::Continuous => Some(NamedKind::DensityApproach),
        _ => None,
    }
}

/// Serializable operator record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDescriptor {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub flavor: Flavor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named: Option<NamedKind>,
    pub theta0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinate: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SteinOperator {
    family: ParametricFamily,
    flavor: Flavor,
    named: Option<NamedKind>,
    theta0: Vec<f64>,
    coordinate: Option<usize>,
}

impl SteinOperator {
    pub fn new(family: ParametricFamily, flavor: Flavor, theta0: Vec<f64>) -> Result<Self> {
        family.validate_theta(&theta0)?;
        let bad = |why: &str| Err(SteinError::Incompatible(format!("{flavor} operator for {}: {why}", family.name())));
        let mut named = None;
        match flavor {
            Flavor::Generic => {}
            Flavor::Location if family.structure() != Structure::Location => return bad("not a location family"),
            Flavor::Scale if family.structure() != Structure::Scale => return bad("not a scale family"),
            Flavor::Location | Flavor::Scale => {}
            Flavor::Discrete => {
                match family.support(&theta0) {
                    Support::Discrete(r) if r.lo == 0 => {}
                    _ => return bad("needs a discrete family supported on {0, 1, ...}"),
                }
                if family.dim() != 1 {
                    return bad("needs a scalar parameter");
                }
            }
            Flavor::Named => named = Some(default_named(&family).ok_or_else(|| {
                SteinError::Incompatible(format!("no named operator for {}", family.name()))
            })?),
        }
        if matches!(flavor, Flavor::Location | Flavor::Scale) && (family.dim() != 1 || family.kind() != Kind::Continuous) {
            return bad("needs a continuous family with scalar parameter");
        }
        Ok(Self { family, flavor, named, theta0, coordinate: None })
    }

    pub fn named(family: ParametricFamily, kind: NamedKind, theta0: Vec<f64>) -> Result<Self> {
        family.validate_theta(&theta0)?;
        let ok = match kind {
            NamedKind::UniformA => family.name() == "uniform_a",
            NamedKind::UniformLocation => family.name() == "uniform_loc",
            NamedKind::StudentNu => family.name() == "student_nu",
            NamedKind::MultinomialSlice => family.name() == "multinomial_p1_slice",
            NamedKind::DensityApproach => family.kind() == Kind::Continuous,
        };
        if !ok {
            return Err(SteinError::Incompatible(format!("{kind:?} operator does not apply to {}", family.name())));
        }
        Ok(Self { family, flavor: Flavor::Named, named: Some(kind), theta0, coordinate: None })
    }

    /// Operator with the family's default flavor at its default θ0.
    pub fn default_for(family: ParametricFamily) -> Result<Self> {
        let theta0 = family.default_theta0().to_vec();
        let flavor = default_flavor(&family);
        Self::new(family, flavor, theta0)
    }

    pub fn with_coordinate(mut self, j: usize) -> Result<Self> {
        if j >= self.family.dim() {
            return Err(SteinError::Input(format!("coordinate {j} out of range for dimension {}", self.family.dim())));
        }
        self.coordinate = Some(j);
        Ok(self)
    }

    pub fn from_descriptor(d: &OperatorDescriptor) -> Result<Self> {
        let family = lookup(&d.family, &d.params)?;
        let op = match (d.flavor, d.named) {
            (Flavor::Named, Some(kind)) => Self::named(family, kind, d.theta0.clone())?,
            (flavor, _) => Self::new(family, flavor, d.theta0.clone())?,
        };
        match d.coordinate {
            Some(j) => op.with_coordinate(j),
            None => Ok(op),
        }
    }

    pub fn descriptor(&self) -> OperatorDescriptor {
        OperatorDescriptor {
            family: self.family.name().to_string(),
            params: if self.family.is_builtin() { self.family.params().to_vec() } else { vec![] },
            flavor: self.flavor,
            named: self.named,
            theta0: self.theta0.clone(),
            coordinate: self.coordinate,
        }
    }

    pub fn family(&self) -> &ParametricFamily {
        &self.family
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn named_kind(&self) -> Option<NamedKind> {
        self.named
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn coordinate(&self) -> Option<usize> {
        self.coordinate
    }

    /// Short human label, e.g. `location operator of gaussian_loc at θ0 = [0]`.
    pub fn label(&self) -> String {
        let kind = match self.named {
            Some(k) => format!("{k:?}"),
            None => self.flavor.to_string(),
        };
        format!("{kind} operator of {} at theta0 = {:?}", self.family.label(), self.theta0)
    }

    fn g0(&self, x: f64) -> f64 {
        self.family.density(x, &self.theta0)
    }

    fn t0(&self) -> f64 {
        self.theta0[0]
    }

    fn dlog(&self, x: f64) -> Result<f64> {
        self.family.spatial_log_derivative(x, &self.theta0)
    }

    /// `T f (x)`, exactly 0 off `S_θ0`. Named operators return their printed
    /// closed form, including any pointwise constants.
    pub fn apply(&self, f: &TestFunction, x: f64) -> Result<f64> {
        if !self.family.in_support(x, &self.theta0) {
            return Ok(0.0);
        }
        match (self.flavor, self.named) {
            (Flavor::Named, Some(NamedKind::UniformA)) => {
                Ok(self.uniform_a_interior(f, x)? - f.eval(0.0))
            }
            _ => self.interior_apply(f, x),
        }
    }

    /// The absolutely continuous part of the operator; for everything except
    /// the uniform endpoint operator this is [`apply`](Self::apply).
    pub fn interior_apply(&self, f: &TestFunction, x: f64) -> Result<f64> {
        if !self.family.in_support(x, &self.theta0) {
            return Ok(0.0);
        }
        match self.flavor {
            Flavor::Generic => {
                let v = self.generic_apply(f, x)?;
                Ok(v[self.coordinate.unwrap_or(0)])
            }
            Flavor::Location => self.location_apply(f, x),
            Flavor::Scale => self.scale_apply(f, x),
            Flavor::Discrete => self.discrete_apply(f, x),
            Flavor::Named => match self.named.expect("named flavor carries a kind") {
                NamedKind::UniformA => self.uniform_a_interior(f, x),
                NamedKind::UniformLocation => f.derivative(x - self.t0()),
                NamedKind::StudentNu => Ok(self.student_printed(f, x)),
                NamedKind::MultinomialSlice => self.multinomial_printed(f, x),
                NamedKind::DensityApproach => Ok(f.derivative(x)? + f.eval(x) * self.dlog(x)?),
            },
        }
    }

    /// `∂_θ (f(x;θ) g(x;θ)) / g(x;θ0)` per coordinate, by central differences
    /// (one-sided where the support moves across `x`).
    pub fn generic_apply(&self, f: &TestFunction, x: f64) -> Result<Vec<f64>> {
        let two = self.embedding(f)?;
        self.generic_apply_two_arg(&two, x)
    }

    pub fn generic_apply_two_arg(&self, two: &TwoArg, x: f64) -> Result<Vec<f64>> {
        let p = self.family.dim();
        if !self.family.in_support(x, &self.theta0) {
            return Ok(vec![0.0; p]);
        }
        let g = self.g0(x);
        if g == 0.0 || !g.is_finite() {
            return Err(SteinError::DegenerateDensity { x });
        }
        let mut out = Vec::with_capacity(p);
        for j in 0..p {
            let prod = |t: f64| {
                let mut th = self.theta0.clone();
                th[j] = t;
                let gt = self.family.density(x, &th);
                if gt == 0.0 {
                    0.0
                } else {
                    two(x, &th) * gt
                }
            };
            let t0 = self.theta0[j];
            let h = central_step(t0, 0.0);
            let member = |t: f64| {
                let mut th = self.theta0.clone();
                th[j] = t;
                self.family.param_space().contains_interior(&th) && self.family.in_support(x, &th)
            };
            let d = match (member(t0 + h), member(t0 - h)) {
                (true, true) => richardson(&prod, t0, h),
                (true, false) => (prod(t0 + h) - prod(t0)) / h,
                (false, true) => (prod(t0) - prod(t0 - h)) / h,
                (false, false) => 0.0,
            };
            if d.is_nan() {
                return Err(SteinError::Numeric(crate::numerics::NumericError::Evaluation { at: x }));
            }
            out.push(d / g);
        }
        Ok(out)
    }

    fn location_apply(&self, f: &TestFunction, x: f64) -> Result<f64> {
        let y = x - self.t0();
        Ok(-(f.derivative(y)? + f.eval(y) * self.dlog(x)?))
    }

    fn scale_apply(&self, f: &TestFunction, x: f64) -> Result<f64> {
        let s = self.t0();
        Ok(x * f.derivative(s * x)? + f.eval(s * x) * (1.0 / s + x / s * self.dlog(x)?))
    }

    fn discrete_apply(&self, f: &TestFunction, x: f64) -> Result<f64> {
        let Some(k) = as_int(x) else { return Ok(0.0) };
        let g = self.g0(x);
        if g == 0.0 {
            return Err(SteinError::DegenerateDensity { x });
        }
        let psi_next = self.family.psi(k + 1, &self.theta0)?;
        let psi_here = self.family.psi(k, &self.theta0)?;
        let next = if psi_next == 0.0 { 0.0 } else { f.eval(x + 1.0) * psi_next };
        let here = if psi_here == 0.0 { 0.0 } else { f.eval(x) * psi_here };
        Ok((next - here) / g)
    }

    fn uniform_ab(&self) -> (f64, f64) {
        let b = self.family.params()[0];
        (self.t0(), b)
    }

    fn uniform_a_interior(&self, f: &TestFunction, x: f64) -> Result<f64> {
        let (a, b) = self.uniform_ab();
        let w = b - a;
        let u = (x - a) / w;
        Ok(((x - b) / w * f.derivative(u)? + f.eval(u)) / w)
    }

    fn student_printed(&self, f: &TestFunction, x: f64) -> f64 {
        let nu = self.t0();
        let q = x * x / nu;
        let xi = -(ln_gamma(0.5 * nu) - ln_gamma(0.5 * (nu + 1.0))).exp() / (2.0 * nu * nu) * (1.0 + q).powf(0.5 * nu);
        let d = f.derivative(q).unwrap_or(f64::NAN);
        xi * (2.0 * x * x * d - f.eval(q) * (x * x / (1.0 + q) - nu))
    }

    fn multinomial_consts(&self) -> (f64, f64) {
        let p = self.family.params();
        let n: f64 = p[0] - p[2..].iter().step_by(2).sum::<f64>();
        let p_bar = 1.0 - p[1..].iter().step_by(2).sum::<f64>();
        (n, p_bar)
    }

    fn multinomial_printed(&self, f: &TestFunction, x: f64) -> Result<f64> {
        let (n, p_bar) = self.multinomial_consts();
        let p1 = self.t0();
        let xi = p_bar / (p_bar - p1).powf(n + 2.0);
        let next = if x < n { (n - x) * f.eval(x + 1.0) } else { 0.0 };
        Ok(xi * (next - (p_bar - p1) / p1 * x * f.eval(x)))
    }

    /// The two-argument form `f(x; θ)` this operator differentiates.
    pub fn embedding(&self, f: &TestFunction) -> Result<TwoArg> {
        embedding(&self.family, self.flavor, self.named, f)
    }

    /// Family-specific closed form of the operator, when one is known.
    pub fn closed_form(&self, f: &TestFunction, x: f64) -> Result<Option<f64>> {
        use crate::families::Builtin as B;
        if !self.family.in_support(x, &self.theta0) {
            return Ok(Some(0.0));
        }
        let Some(model) = self.family.builtin_model() else { return Ok(None) };
        let t = self.t0();
        let y = x - t;
        let fe = |v: f64| f.eval(v);
        let fd = |v: f64| f.derivative(v);
        let v = match *model {
            B::GaussianLoc { sigma } => -fd(y)? + y / (sigma * sigma) * fe(y),
            B::GaussianMultivCoord { shift, sd } => -fd(y)? + (y - shift) / (sd * sd) * fe(y),
            B::GaussianScale => x * fd(t * x)? + fe(t * x) * (1.0 / t - t * x * x),
            B::ExponentialLoc { lambda } => -fd(y)? + lambda * fe(y),
            B::ExponentialScale => x * fd(t * x)? + fe(t * x) * (1.0 / t - x),
            B::UniformA { .. } => self.uniform_a_interior(f, x)? - fe(0.0),
            B::UniformLoc { .. } => fd(y)?,
            B::SemicircleLoc { sigma } => -fd(y)? + y * fe(y) / (sigma * sigma - y * y),
            B::StudentNu => self.student_printed(f, x),
            B::PoissonLambda => t.exp() * (fe(x + 1.0) - x / t * fe(x)),
            B::GeometricP => -((x + 1.0) * fe(x + 1.0) - x / (1.0 - t) * fe(x)) / t,
            B::BinomialP { n } => {
                let n = n as f64;
                let next = if x < n { (n - x) * fe(x + 1.0) } else { 0.0 };
                (1.0 - t).powf(-(n + 2.0)) * (next - (1.0 - t) / t * x * fe(x))
            }
            B::MultinomialSlice { .. } => self.multinomial_printed(f, x)?,
        };
        Ok(Some(v))
    }

    /// Plain-text rendering of the closed form for reports.
    pub fn closed_form_text(&self) -> String {
        use crate::families::Builtin as B;
        if let Some(NamedKind::DensityApproach) = self.named {
            return "T F(x) = F'(x) + F(x) d/dx log g(x)".into();
        }
        if self.flavor == Flavor::Generic && self.family.builtin_model().is_none() {
            return "T f(x) = d/dtheta [f(x;theta) g(x;theta)] at theta0, divided by g(x;theta0)".into();
        }
        let Some(model) = self.family.builtin_model() else {
            return match self.flavor {
                Flavor::Location => "T f0(x) = -(f0'(x-mu0) + f0(x-mu0) d/dx log g(x;mu0))".into(),
                Flavor::Scale => {
                    "T f0(x) = x f0'(s0 x) + f0(s0 x) (1/s0 + (x/s0) d/dx log g(x;s0))".into()
                }
                _ => "T f0(x) = [f0(x+1) psi(x+1) - f0(x) psi(x)] / g(x;theta0)".into(),
            };
        };
        match *model {
            B::GaussianLoc { .. } => "T f0(x) = -f0'(x-mu0) + ((x-mu0)/sigma^2) f0(x-mu0)".into(),
            B::GaussianMultivCoord { .. } => "T f0(x) = -f0'(y) + ((y-shift)/sd^2) f0(y), y = x-mu0".into(),
            B::GaussianScale => "T f0(x) = x f0'(s0 x) + (1/s0 - s0 x^2) f0(s0 x)".into(),
            B::ExponentialLoc { .. } => {
                "T f0(x) = -f0'(x-mu0) + lambda f0(x-mu0); boundary term -lambda f0(0+)".into()
            }
            B::ExponentialScale => "T f0(x) = x f0'(s0 x) + (1/s0 - x) f0(s0 x)".into(),
            B::UniformA { .. } => "T f0(x) = (1/(b-a)) [((x-b)/(b-a)) f0'(u) + f0(u)] - f0(0), u = (x-a)/(b-a)".into(),
            B::UniformLoc { .. } if self.flavor == Flavor::Named => {
                "T f0(x) = f0'(x-mu0); E[T f0] = f0(b-) - f0(a+)".into()
            }
            B::UniformLoc { .. } => "T f0(x) = -f0'(x-mu0); boundary terms f0(a+) - f0(b-)".into(),
            B::SemicircleLoc { .. } => "T f0(x) = -f0'(y) + y f0(y)/(sigma^2 - y^2), y = x-mu0".into(),
            B::StudentNu => "T f0(x) = xi(x;nu) [2x^2 f0'(x^2/nu) - f0(x^2/nu)(x^2/(1+x^2/nu) - nu)], \
                             xi = -Gamma(nu/2)/(2 nu^2 Gamma((nu+1)/2)) (1+x^2/nu)^(nu/2)"
                .into(),
            B::PoissonLambda => "T f0(x) = e^lambda0 (f0(x+1) - (x/lambda0) f0(x))".into(),
            B::GeometricP => "T f0(x) = -(1/p)((x+1) f0(x+1) - (x/(1-p)) f0(x))".into(),
            B::BinomialP { .. } => "T f0(x) = (1-p)^-(n+2) ((n-x) f0(x+1) - ((1-p)/p) x f0(x))".into(),
            B::MultinomialSlice { .. } => {
                "T f0(x) = pbar/(pbar-p1)^(nbar+2) ((nbar-x) f0(x+1) - ((pbar-p1)/p1) x f0(x))".into()
            }
        }
    }

    /// Point masses the operator carries at support endpoints, integrated
    /// against a law with density `law` (one-sided limits taken inside the
    /// target support).
    pub fn boundary_functional(&self, f: &TestFunction, law: &dyn Fn(f64) -> f64) -> Result<f64> {
        let Support::Continuous(iv) = self.family.support(&self.theta0) else { return Ok(0.0) };
        let inside = |e: f64, up: bool| {
            let eps = 1e-13 * e.abs().max(1.0);
            if up {
                e + eps
            } else {
                e - eps
            }
        };
        let lo = iv.lo.is_finite().then(|| inside(iv.lo, true));
        let hi = iv.hi.is_finite().then(|| inside(iv.hi, false));
        // density-approach form: + F(lo+) h(lo+) - F(hi-) h(hi-) where g jumps;
        // a density that merely tends to 0 leaves no mass
        let typical = iv.lo.max(-1.0).min(iv.hi);
        let typical = self.g0(if iv.is_bounded() { 0.5 * (iv.lo + iv.hi) } else { typical });
        let jumps = |e: f64| self.g0(e) > 1e-6 * typical;
        let density_rule = |big_f: &dyn Fn(f64) -> f64| -> f64 {
            let mut acc = 0.0;
            if let Some(l) = lo {
                if jumps(l) {
                    acc += big_f(l) * law(l);
                }
            }
            if let Some(h) = hi {
                if jumps(h) {
                    acc -= big_f(h) * law(h);
                }
            }
            acc
        };
        let t = self.t0();
        match (self.flavor, self.named) {
            (Flavor::Location, _) => Ok(density_rule(&|x| -f.eval(x - t))),
            (Flavor::Scale, _) => Ok(density_rule(&|x| x * f.eval(t * x) / t)),
            (Flavor::Named, Some(NamedKind::DensityApproach)) => Ok(density_rule(&|x| f.eval(x))),
            (Flavor::Named, Some(NamedKind::UniformLocation)) => Ok(-density_rule(&|x| -f.eval(x - t))),
            (Flavor::Generic, _) | (Flavor::Named, Some(NamedKind::UniformA)) => {
                let two = self.embedding(f)?;
                let j = self.coordinate.unwrap_or(0);
                let h = central_step(self.theta0[j], 0.0);
                let end = |s: f64, upper: bool| {
                    let mut th = self.theta0.clone();
                    th[j] += s;
                    let hull = self.family.support(&th).hull();
                    if upper {
                        hull.hi
                    } else {
                        hull.lo
                    }
                };
                let mut acc = 0.0;
                if let Some(l) = lo {
                    let de = (end(h, false) - end(-h, false)) / (2.0 * h);
                    if de != 0.0 {
                        acc -= de * two(l, &self.theta0) * law(l);
                    }
                }
                if let Some(u) = hi {
                    let de = (end(h, true) - end(-h, true)) / (2.0 * h);
                    if de != 0.0 {
                        acc += de * two(u, &self.theta0) * law(u);
                    }
                }
                Ok(acc)
            }
            _ => Ok(0.0),
        }
    }

    /// Largest gap between `∂_θ(f(x;θ) g(x;θ))` and `∂_y(F(y) g(y;θ0))` at
    /// `y = x`, divided by `g(x;θ0)`, where `F` is the location or scale
    /// companion of `f_0`.
    pub fn exchangeability_gap(&self, f: &TestFunction, grid: &[f64]) -> Result<f64> {
        let t = self.t0();
        let big_f: Arc<dyn Fn(f64) -> f64> = match self.flavor {
            Flavor::Location => {
                let f = f.clone();
                Arc::new(move |y| -f.eval(y - t))
            }
            Flavor::Scale => {
                let f = f.clone();
                Arc::new(move |y| y * f.eval(t * y) / t)
            }
            _ => return Err(SteinError::Incompatible("exchangeability applies to location and scale operators".into())),
        };
        let two = self.embedding(f)?;
        let mut worst = 0.0f64;
        for &x in grid {
            if !self.family.support(&self.theta0).hull().contains_interior(x) {
                continue;
            }
            let lhs = self.generic_apply_two_arg(&two, x)?[0];
            let rhs = central_diff(|y| big_f(y) * self.g0(y), x, 0.0)? / self.g0(x);
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    }
}

/// Central difference with one Richardson step, `O(h⁴)` truncation error.
fn richardson(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    let d = |s: f64| (f(t + s) - f(t - s)) / (2.0 * s);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// `f(x; θ)` built from a one-argument `f_0` for each flavor; the generic
/// flavor needs an explicit two-argument form.
pub(crate) fn embedding(
    family: &ParametricFamily,
    flavor: Flavor,
    named: Option<NamedKind>,
    f: &TestFunction,
) -> Result<TwoArg> {
    if flavor == Flavor::Generic {
        return f.two_arg().cloned().ok_or_else(|| {
            SteinError::Capability(format!("test function {} has no two-argument form", f.label()))
        });
    }
    let f0 = f.clone();
    let fam = family.clone();
    Ok(match (flavor, named) {
        (Flavor::Location, _) | (Flavor::Named, Some(NamedKind::UniformLocation)) => {
            Arc::new(move |x, t| f0.eval(x - t[0]))
        }
        (Flavor::Scale, _) => Arc::new(move |x, t| f0.eval(t[0] * x)),
        (Flavor::Discrete, _) | (Flavor::Named, Some(NamedKind::MultinomialSlice)) => Arc::new(move |x, t| {
            let g = fam.density(x, t);
            if g == 0.0 {
                return 0.0;
            }
            let g1 = fam.density(x + 1.0, t);
            let next = if g1 == 0.0 { 0.0 } else { f0.eval(x + 1.0) * g1 };
            (next - f0.eval(x) * g) / (g * fam.density(0.0, t))
        }),
        (Flavor::Named, Some(NamedKind::UniformA)) => {
            let b = family.params()[0];
            Arc::new(move |x, t| f0.eval((x - t[0]) / (b - t[0])))
        }
        (Flavor::Named, Some(NamedKind::StudentNu)) => Arc::new(move |x, t| {
            let nu = t[0];
            let q = x * x / nu;
            (ln_gamma(0.5 * nu) - ln_gamma(0.5 * (nu + 1.0))).exp() * (1.0 + q).powf(0.5 * nu) * f0.eval(q)
        }),
        _ => {
            return Err(SteinError::Capability(format!(
                "{flavor} operator of {} has no parameter embedding",
                family.name()
            )))
        }
    })
}

#[cfg(test)]
mod tests;
