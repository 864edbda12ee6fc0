//! Test-function batteries and admissibility probes.

mod conditions;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinError};
use crate::numerics::central_diff;

pub use conditions::{check_conditions, ConditionReport};

pub type OneArg = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type TwoArg = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// A test function `f_0(x)`, optionally with an analytic derivative and a
/// parameter-dependent form `f(x; θ)`.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    eval: OneArg,
    derivative: Option<OneArg>,
    two_arg: Option<TwoArg>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("derivative", &self.derivative.is_some())
            .field("two_arg", &self.two_arg.is_some())
            .finish()
    }
}

impl TestFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), eval: Arc::new(f), derivative: None, two_arg: None }
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn with_two_arg(mut self, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.two_arg = Some(Arc::new(f));
        self
    }

    /// A function given only through its two-argument form; the one-argument
    /// view evaluates it at `theta0`.
    pub fn from_two_arg(label: impl Into<String>, theta0: Vec<f64>, f: TwoArg) -> Self {
        let g = f.clone();
        Self { label: label.into(), eval: Arc::new(move |x| g(x, &theta0)), derivative: None, two_arg: Some(f) }
    }

    pub fn zero() -> Self {
        Self::new("0", |_| 0.0).with_derivative(|_| 0.0).with_two_arg(|_, _| 0.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// Analytic derivative when attached, central difference otherwise.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        match &self.derivative {
            Some(d) => Ok(d(x)),
            None => Ok(central_diff(&*self.eval, x, 1.0)?),
        }
    }

    pub fn two_arg(&self) -> Option<&TwoArg> {
        self.two_arg.as_ref()
    }

    pub fn without_derivative(mut self) -> Self {
        self.derivative = None;
        self
    }

    /// `c · f`, carrying derivative and two-argument form along.
    pub fn scaled(&self, c: f64) -> Self {
        let e = self.eval.clone();
        let mut out = Self::new(format!("{c}*{}", self.label), move |x| c * e(x));
        if let Some(d) = self.derivative.clone() {
            out = out.with_derivative(move |x| c * d(x));
        }
        if let Some(t) = self.two_arg.clone() {
            out = out.with_two_arg(move |x, th| c * t(x, th));
        }
        out
    }

    /// `a · f + b · g`.
    pub fn combine(a: f64, f: &TestFunction, b: f64, g: &TestFunction) -> Self {
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        let mut out = Self::new(format!("{a}*{} + {b}*{}", f.label, g.label), move |x| a * fe(x) + b * ge(x));
        if let (Some(fd), Some(gd)) = (f.derivative.clone(), g.derivative.clone()) {
            out = out.with_derivative(move |x| a * fd(x) + b * gd(x));
        }
        if let (Some(ft), Some(gt)) = (f.two_arg.clone(), g.two_arg.clone()) {
            out = out.with_two_arg(move |x, th| a * ft(x, th) + b * gt(x, th));
        }
        out
    }

    /// Largest gap between the attached derivative and a central difference.
    pub fn derivative_defect(&self, grid: &[f64]) -> Result<f64> {
        let Some(d) = &self.derivative else { return Ok(0.0) };
        let mut worst = 0.0f64;
        for &x in grid {
            let n = central_diff(&*self.eval, x, 1.0)?;
            worst = worst.max((d(x) - n).abs() / (1.0 + n.abs()));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    None,
    Gaussian,
}

/// Monomials `x^k`, `k = 0..=max_degree`, optionally times `exp(-x²/4)`.
pub fn polynomial_battery(max_degree: u32, damping: Damping) -> Vec<TestFunction> {
    (0..=max_degree as i32)
        .map(|k| {
            let kf = k as f64;
            let pow = move |x: f64, j: i32| if j < 0 { 0.0 } else { x.powi(j) };
            match damping {
                Damping::None => {
                    let label = match k {
                        0 => "1".to_string(),
                        1 => "x".to_string(),
                        _ => format!("x^{k}"),
                    };
                    TestFunction::new(label, move |x| pow(x, k)).with_derivative(move |x| kf * pow(x, k - 1))
                }
                Damping::Gaussian => {
                    let label = match k {
                        0 => "exp(-x^2/4)".to_string(),
                        1 => "x exp(-x^2/4)".to_string(),
                        _ => format!("x^{k} exp(-x^2/4)"),
                    };
                    let w = |x: f64| (-0.25 * x * x).exp();
                    TestFunction::new(label, move |x| pow(x, k) * w(x))
                        .with_derivative(move |x| (kf * pow(x, k - 1) - 0.5 * pow(x, k + 1)) * w(x))
                }
            }
        })
        .collect()
}

/// Probabilists' Hermite polynomials `He_0 .. He_{count-1}`.
pub fn hermite_battery(count: usize) -> Vec<TestFunction> {
    fn he(n: usize, x: f64) -> f64 {
        let (mut a, mut b) = (1.0, x);
        match n {
            0 => a,
            _ => {
                for k in 1..n {
                    let c = x * b - k as f64 * a;
                    a = b;
                    b = c;
                }
                b
            }
        }
    }
    (0..count)
        .map(|n| {
            let nf = n as f64;
            TestFunction::new(format!("He_{n}"), move |x| he(n, x))
                .with_derivative(move |x| if n == 0 { 0.0 } else { nf * he(n - 1, x) })
        })
        .collect()
}

/// `f_0(y) = f_1(y)(σ² − y²)`, the form that keeps semicircle boundary
/// terms at zero.
pub fn precompose_semicircle(f1: &TestFunction, sigma: f64) -> TestFunction {
    let s2 = sigma * sigma;
    let (e, e2) = (f1.eval.clone(), f1.eval.clone());
    let f1c = f1.clone();
    TestFunction::new(format!("({})({s2}-x^2)", f1.label), move |y| e(y) * (s2 - y * y))
        .with_derivative(move |y| f1c.derivative(y).unwrap_or(f64::NAN) * (s2 - y * y) - 2.0 * y * e2(y))
}

/// Battery description as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BatterySpec {
    Polynomial {
        max_degree: u32,
        #[serde(default = "default_damping")]
        damping: Damping,
    },
    Hermite {
        count: usize,
    },
}

fn default_damping() -> Damping {
    Damping::None
}

impl Default for BatterySpec {
    fn default() -> Self {
        BatterySpec::Polynomial { max_degree: 3, damping: Damping::Gaussian }
    }
}

impl BatterySpec {
    pub fn build(&self) -> Result<Vec<TestFunction>> {
        match *self {
            BatterySpec::Polynomial { max_degree, damping } => Ok(polynomial_battery(max_degree, damping)),
            BatterySpec::Hermite { count } if count == 0 => Err(SteinError::Input("hermite battery needs count >= 1".into())),
            BatterySpec::Hermite { count } => Ok(hermite_battery(count)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polynomial_members() {
        let b = polynomial_battery(2, Damping::None);
        let labels: Vec<&str> = b.iter().map(|f| f.label()).collect();
        assert_eq!(labels, ["1", "x", "x^2"]);
        assert_eq!(b[2].eval(3.0), 9.0);
        let c = polynomial_battery(0, Damping::None);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].eval(-7.0), 1.0);
    }

    #[test]
    fn damped_identity_has_unit_slope_at_zero() {
        let b = polynomial_battery(1, Damping::Gaussian);
        assert_eq!(b[1].derivative(0.0).unwrap(), 1.0);
    }

    #[test]
    fn hermite_values() {
        let h = hermite_battery(4);
        assert_eq!(h[2].eval(2.0), 3.0);
        assert_eq!(h[3].eval(2.0), 2.0);
        assert_eq!(h[3].derivative(1.0).unwrap(), 0.0);
    }

    #[test]
    fn attached_derivatives_agree_with_differences() {
        let grid: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let all = polynomial_battery(4, Damping::Gaussian)
            .into_iter()
            .chain(polynomial_battery(4, Damping::None))
            .chain(hermite_battery(6))
            .chain(std::iter::once(precompose_semicircle(&polynomial_battery(2, Damping::None)[2], 2.0)));
        for f in all {
            let d = f.derivative_defect(&grid).unwrap();
            assert!(d < 1e-5, "{}: {d}", f.label());
        }
    }

    #[test]
    fn battery_spec_round_trip() {
        let s: BatterySpec = serde_json::from_str(r#"{"type":"polynomial","max_degree":3,"damping":"gaussian"}"#).unwrap();
        assert_eq!(s, BatterySpec::default());
        assert_eq!(s.build().unwrap().len(), 4);
        let h: BatterySpec = serde_json::from_str(r#"{"type":"hermite","count":3}"#).unwrap();
        assert_eq!(h.build().unwrap().len(), 3);
        assert!(serde_json::from_str::<BatterySpec>(r#"{"type":"hermite","count":3,"extra":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn combine_is_pointwise_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, x in -5.0f64..5.0) {
            let bat = polynomial_battery(3, Damping::Gaussian);
            let h = TestFunction::combine(a, &bat[1], b, &bat[3]);
            let want = a * bat[1].eval(x) + b * bat[3].eval(x);
            prop_assert!((h.eval(x) - want).abs() <= 1e-12 * (1.0 + want.abs()));
            let dw = a * bat[1].derivative(x).unwrap() + b * bat[3].derivative(x).unwrap();
            prop_assert!((h.derivative(x).unwrap() - dw).abs() <= 1e-12 * (1.0 + dw.abs()));
        }
    }
}
