use serde::{Deserialize, Serialize};

use super::{TestFunction, TwoArg};
use crate::error::{Result, SteinError};
use crate::families::{Kind, ParametricFamily, Support, Verdict};
use crate::numerics::{central_diff, integrate_with, sum_series, IntRange, NumericError, QuadratureOptions, Tolerances};
use crate::operators::{embedding, Flavor, NamedKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `i`, `ii`, `iii`, or the `μ-`/`σ-` prefixed variants
    pub condition: String,
    pub verdict: Verdict,
    pub c_f_estimate: Option<f64>,
    pub max_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_theta: Option<Vec<f64>>,
    pub detail: String,
}

const THETA_PROBES: usize = 5;
const ENVELOPE_PROBES: usize = 9;

/// Probes the admissibility conditions for `f` under `family` at `θ0`.
///
/// Location, scale and discrete flavors embed the one-argument `f` as
/// `f(x − μ)`, `f(σx)` and the forward-difference form; generic needs
/// `f`'s own two-argument form.
pub fn check_conditions(
    family: &ParametricFamily,
    theta0: &[f64],
    f: &TestFunction,
    flavor: Flavor,
) -> Result<Vec<ConditionReport>> {
    family.validate_theta(theta0)?;
    match flavor {
        Flavor::Discrete if family.kind() != Kind::Discrete => {
            return Err(SteinError::Incompatible("discrete conditions need a discrete family".into()))
        }
        Flavor::Location | Flavor::Scale if family.kind() != Kind::Continuous => {
            return Err(SteinError::Incompatible(format!("{flavor} conditions need a continuous family")))
        }
        _ => {}
    }
    let named = match (flavor, family.name()) {
        (Flavor::Named, "uniform_a") => Some(NamedKind::UniformA),
        (Flavor::Named, "uniform_loc") => Some(NamedKind::UniformLocation),
        (Flavor::Named, "student_nu") => Some(NamedKind::StudentNu),
        (Flavor::Named, "multinomial_p1_slice") => Some(NamedKind::MultinomialSlice),
        (Flavor::Named, _) => {
            return Err(SteinError::Capability(format!("no parameter embedding for a named operator of {}", family.name())))
        }
        _ => None,
    };
    let two = embedding(family, flavor, named, f)?;
    let prefix = match flavor {
        Flavor::Location => "μ-",
        Flavor::Scale => "σ-",
        _ => "",
    };
    let probe = Probe { family, theta0, two };
    Ok(vec![probe.constancy(prefix), probe.smoothness(prefix)?, probe.domination(prefix)])
}

struct Probe<'a> {
    family: &'a ParametricFamily,
    theta0: &'a [f64],
    two: TwoArg,
}

impl Probe<'_> {
    fn product(&self, x: f64, theta: &[f64]) -> f64 {
        let g = self.family.density(x, theta);
        if g == 0.0 {
            0.0
        } else {
            (self.two)(x, theta) * g
        }
    }

    fn thetas(&self, count: usize) -> Vec<Vec<f64>> {
        let hood = self.family.neighborhood(self.theta0, None);
        let mut out = vec![self.theta0.to_vec()];
        for (j, iv) in hood.iter().enumerate() {
            for i in 0..count {
                let mut t = self.theta0.to_vec();
                t[j] = iv.lo + (iv.hi - iv.lo) * i as f64 / (count - 1) as f64;
                if t != self.theta0 {
                    out.push(t);
                }
            }
        }
        out
    }

    fn total(&self, theta: &[f64]) -> std::result::Result<f64, NumericError> {
        match self.family.support(theta) {
            Support::Continuous(iv) => {
                let opts = QuadratureOptions::with_tol(Tolerances { abs: 1e-12, rel: 1e-10 });
                let r = integrate_with(|x| self.product(x, theta), iv, &opts)?;
                Ok(r.value)
            }
            Support::Discrete(r) => Ok(sum_series(|k| self.product(k as f64, theta), r, 1e-14)?.value),
        }
    }

    /// (i): `θ ↦ ∫ f(·;θ) g(·;θ)` is constant near θ0.
    fn constancy(&self, prefix: &str) -> ConditionReport {
        let label = format!("{prefix}i");
        let mut c_f = None;
        let mut drift = 0.0f64;
        for t in self.thetas(THETA_PROBES) {
            match self.total(&t) {
                Ok(v) if v.is_finite() => {
                    let c = *c_f.get_or_insert(v);
                    drift = drift.max((v - c).abs());
                }
                Ok(v) => return fail(label, c_f, t, format!("integral is {v}")),
                Err(e) => return fail(label, c_f, t, format!("integral does not converge: {e}")),
            }
        }
        let c = c_f.unwrap_or(0.0);
        let tol = 1e-6 * (1.0 + c.abs());
        ConditionReport {
            condition: label,
            verdict: if drift <= tol { Verdict::Pass } else { Verdict::Fail },
            c_f_estimate: c_f,
            max_drift: drift,
            witness_theta: None,
            detail: format!("integral over {THETA_PROBES} theta probes; drift tolerance {tol:e}"),
        }
    }

    /// (ii): one-sided θ-differences of `f g` agree at interior probes.
    fn smoothness(&self, prefix: &str) -> Result<ConditionReport> {
        let label = format!("{prefix}ii");
        let xs: Vec<f64> = match self.family.kind() {
            Kind::Continuous => (1..=16)
                .map(|i| self.family.quantile(0.02 + 0.96 * (i - 1) as f64 / 15.0, self.theta0))
                .collect::<Result<_>>()?,
            Kind::Discrete => self.family.probe_points(self.theta0, 16)?,
        };
        let mut worst = 0.0f64;
        let mut kinked = false;
        let mut verdict = Verdict::Pass;
        for j in 0..self.theta0.len() {
            let h = 1e-5 * self.theta0[j].abs().max(1.0);
            let at = |s: f64| {
                let mut t = self.theta0.to_vec();
                t[j] += s;
                t
            };
            // one-sided gaps shrink linearly in the step for smooth
            // products and stay put across a kink
            let gap = |x: f64, g: f64, step: f64| {
                let mid = self.product(x, self.theta0);
                let fwd = (self.product(x, &at(step)) - mid) / step / g;
                let bwd = (mid - self.product(x, &at(-step))) / step / g;
                ((fwd - bwd).abs(), 0.5 * (fwd.abs() + bwd.abs()))
            };
            for &x in &xs {
                let g = self.family.density(x, self.theta0);
                if g == 0.0 {
                    continue;
                }
                let (wide, size) = gap(x, g, h);
                let (narrow, _) = gap(x, g, 0.5 * h);
                if !(wide.is_finite() && narrow.is_finite()) {
                    verdict = Verdict::Inconclusive;
                    continue;
                }
                let rel = wide / (1.0 + size);
                worst = worst.max(rel);
                if rel > 1e-3 && narrow > 0.75 * wide {
                    kinked = true;
                }
            }
        }
        if kinked {
            verdict = Verdict::Fail;
        }
        Ok(ConditionReport {
            condition: label,
            verdict,
            c_f_estimate: None,
            max_drift: worst,
            witness_theta: None,
            detail: format!("one-sided theta differences at {} probes", xs.len()),
        })
    }

    /// (iii): `sup_θ |∂_θ(f g)|` over the probe grid is integrable.
    fn domination(&self, prefix: &str) -> ConditionReport {
        let label = format!("{prefix}iii");
        let thetas = self.thetas(ENVELOPE_PROBES);
        let env = |x: f64| {
            let mut m = 0.0f64;
            for t in &thetas {
                for j in 0..t.len() {
                    let d = central_diff(
                        |s| {
                            let mut u = t.clone();
                            u[j] = s;
                            self.product(x, &u)
                        },
                        t[j],
                        0.0,
                    );
                    match d {
                        Ok(v) => m = m.max(v.abs()),
                        Err(_) => return f64::NAN,
                    }
                }
            }
            m
        };
        let result = match self.family.kind() {
            Kind::Continuous => {
                let mut hull = self.family.support(&thetas[0]).hull();
                let mut cuts = Vec::new();
                for t in &thetas {
                    let s = self.family.support(t).hull();
                    cuts.extend([s.lo, s.hi].into_iter().filter(|v| v.is_finite()));
                    hull = hull.hull(&s);
                }
                let opts = QuadratureOptions::with_tol(Tolerances { abs: 1e-9, rel: 1e-6 }).breakpoints(cuts);
                integrate_with(env, hull, &opts)
            }
            Kind::Discrete => {
                let lo = thetas.iter().map(|t| self.family.support(t).hull().lo).fold(f64::INFINITY, f64::min);
                let hi = thetas.iter().map(|t| self.family.support(t).hull().hi).fold(f64::NEG_INFINITY, f64::max);
                let range = IntRange { lo: lo as i64, hi: hi.is_finite().then_some(hi as i64) };
                sum_series(|k| env(k as f64), range, 1e-12)
            }
        };
        match result {
            Ok(r) if r.value.is_finite() => ConditionReport {
                condition: label,
                verdict: Verdict::Pass,
                c_f_estimate: None,
                max_drift: r.value,
                witness_theta: None,
                detail: format!("envelope over {} theta probes integrates to {}", thetas.len(), r.value),
            },
            Ok(r) => fail(label, None, self.theta0.to_vec(), format!("envelope integral is {}", r.value)),
            Err(e) => fail(label, None, self.theta0.to_vec(), format!("envelope is not integrable: {e}")),
        }
    }
}

fn fail(condition: String, c_f: Option<f64>, witness: Vec<f64>, detail: String) -> ConditionReport {
    ConditionReport {
        condition,
        verdict: Verdict::Fail,
        c_f_estimate: c_f,
        max_drift: f64::INFINITY,
        witness_theta: Some(witness),
        detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::builtin;
    use crate::test_functions::{polynomial_battery, Damping};

    fn all_pass(r: &[ConditionReport]) -> bool {
        r.iter().all(|c| c.verdict == Verdict::Pass)
    }

    #[test]
    fn identity_is_admissible_for_gaussian_location() {
        let g = builtin("gaussian_loc", &[]).unwrap();
        let f = TestFunction::new("x", |x| x).with_derivative(|_| 1.0);
        let r = check_conditions(&g, &[0.0], &f, Flavor::Location).unwrap();
        assert!(all_pass(&r), "{r:?}");
        assert_eq!(r[0].condition, "μ-i");
        assert!(r[0].c_f_estimate.unwrap().abs() < 1e-10);
    }

    #[test]
    fn exploding_function_fails_location_constancy() {
        let g = builtin("gaussian_loc", &[]).unwrap();
        let f = TestFunction::new("exp(x^2)", |x| (x * x).exp());
        let r = check_conditions(&g, &[0.0], &f, Flavor::Location).unwrap();
        assert_eq!(r[0].verdict, Verdict::Fail, "{r:?}");
        assert!(r[0].witness_theta.is_some());
    }

    #[test]
    fn constant_is_admissible_for_poisson() {
        let p = builtin("poisson_lambda", &[]).unwrap();
        let f = TestFunction::new("1", |_| 1.0);
        let r = check_conditions(&p, &[1.0], &f, Flavor::Discrete).unwrap();
        assert!(all_pass(&r), "{r:?}");
        assert!((r[0].c_f_estimate.unwrap() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn damped_battery_closure() {
        for name in ["gaussian_loc", "gaussian_scale", "exponential_scale"] {
            let fam = builtin(name, &[]).unwrap();
            let flavor = crate::operators::default_flavor(&fam);
            for f in polynomial_battery(3, Damping::Gaussian) {
                let r = check_conditions(&fam, fam.default_theta0(), &f, flavor).unwrap();
                assert!(all_pass(&r), "{name} {}: {r:?}", f.label());
            }
        }
    }

    #[test]
    fn generic_needs_two_argument_form() {
        let g = builtin("gaussian_loc", &[]).unwrap();
        let f = TestFunction::new("x", |x| x);
        assert!(matches!(check_conditions(&g, &[0.0], &f, Flavor::Generic), Err(SteinError::Capability(_))));
        let f = f.with_two_arg(|x, t| x - t[0]);
        assert!(all_pass(&check_conditions(&g, &[0.0], &f, Flavor::Generic).unwrap()));
    }
}
