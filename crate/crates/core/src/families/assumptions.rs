//! Probe-grid semidecisions for the domination and tail assumptions.

use serde::{Deserialize, Serialize};

use super::{default_radius, Kind, ParametricFamily, Support, Verdict};
use crate::error::{Result, SteinError};
use crate::numerics::{integrate_with, sum_series, IntRange, Interval, NumericError, QuadratureOptions, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// integrable envelope of `g(x; θ)` over a θ-neighbourhood
    A,
    /// summable envelope of the forward-difference quantity for discrete laws
    #[serde(rename = "A'")]
    APrime,
    /// finite outer integral of the centered cumulative `∫ l_A g`
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub theta_probes: usize,
    pub x_probes: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self { theta_probes: 9, x_probes: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub verdict: Verdict,
    /// `(x, θ)` pairs where the envelope was attained
    pub witness_grid: Vec<(f64, f64)>,
    pub max_violation: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// Numerically probes assumption `which` on `[θ0 − radius, θ0 + radius]`.
pub fn check_assumption(
    family: &ParametricFamily,
    which: Assumption,
    theta0: &[f64],
    radius: Option<f64>,
    grid: ProbeSpec,
) -> Result<AssumptionReport> {
    family.validate_theta(theta0)?;
    if let Some(r) = radius {
        if !(r > 0.0) {
            return Err(SteinError::Input(format!("radius must be positive, got {r}")));
        }
    }
    if grid.theta_probes < 2 {
        return Err(SteinError::Input("need at least two theta probes".into()));
    }
    match which {
        Assumption::A => check_a(family, theta0, radius, grid),
        Assumption::APrime => check_a_prime(family, theta0, radius, grid),
        Assumption::B => check_b(family, theta0),
    }
}

fn theta_probes(family: &ParametricFamily, theta0: &[f64], radius: Option<f64>, k: usize) -> Vec<Vec<f64>> {
    let hood = family.neighborhood(theta0, radius);
    let mut out = Vec::new();
    for (j, iv) in hood.iter().enumerate() {
        for i in 0..k {
            let mut t = theta0.to_vec();
            t[j] = iv.lo + (iv.hi - iv.lo) * i as f64 / (k - 1) as f64;
            out.push(t);
        }
    }
    out
}

fn envelope_total(family: &ParametricFamily, probes: &[Vec<f64>]) -> std::result::Result<f64, NumericError> {
    let env = |x: f64| probes.iter().map(|t| family.density(x, t)).fold(0.0, f64::max);
    match family.kind() {
        Kind::Continuous => {
            let mut hull: Option<Interval> = None;
            let mut cuts = Vec::new();
            for t in probes {
                let s = family.support(t).hull();
                cuts.extend([s.lo, s.hi].into_iter().filter(|v| v.is_finite()));
                hull = Some(hull.map_or(s, |h| h.hull(&s)));
            }
            let dom = hull.expect("at least one probe");
            let opts = QuadratureOptions::with_tol(Tolerances { abs: 1e-10, rel: 1e-9 }).breakpoints(cuts);
            Ok(integrate_with(env, dom, &opts)?.value)
        }
        Kind::Discrete => {
            let lo = probes.iter().map(|t| family.support(t).hull().lo).fold(f64::INFINITY, f64::min);
            let hi = probes.iter().map(|t| family.support(t).hull().hi).fold(f64::NEG_INFINITY, f64::max);
            let range = IntRange { lo: lo as i64, hi: hi.is_finite().then_some(hi as i64) };
            Ok(sum_series(|k| env(k as f64), range, 1e-12)?.value)
        }
    }
}

fn witnesses(family: &ParametricFamily, theta0: &[f64], probes: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let xs = family.probe_points(theta0, 16).unwrap_or_default();
    xs.into_iter()
        .map(|x| {
            let best = probes
                .iter()
                .map(|t| (family.density(x, t), t[0]))
                .fold((f64::NEG_INFINITY, theta0[0]), |a, b| if b.0 > a.0 { b } else { a });
            (x, best.1)
        })
        .collect()
}

fn check_a(family: &ParametricFamily, theta0: &[f64], radius: Option<f64>, grid: ProbeSpec) -> Result<AssumptionReport> {
    let mut k = grid.theta_probes;
    let mut totals = Vec::new();
    let mut last_probes = Vec::new();
    for _ in 0..5 {
        let probes = theta_probes(family, theta0, radius, k);
        match envelope_total(family, &probes) {
            Ok(v) => totals.push(v),
            Err(e) => {
                let witness = probes.iter().map(|t| (f64::NAN, t[0])).take(1).collect();
                return Ok(AssumptionReport {
                    assumption: Assumption::A,
                    verdict: Verdict::Fail,
                    witness_grid: witness,
                    max_violation: f64::INFINITY,
                    tolerance: 0.0,
                    detail: format!("envelope with {k} theta probes is not integrable: {e}"),
                });
            }
        }
        last_probes = probes;
        k = 2 * k - 1;
    }
    let total = *totals.last().expect("five refinements");
    let incs: Vec<f64> = totals.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let negligible = |d: f64| d <= 1e-9 * (1.0 + total);
    let ratios: Vec<f64> =
        incs.windows(2).map(|w| if negligible(w[1]) { 0.0 } else { w[1] / w[0].max(f64::MIN_POSITIVE) }).collect();
    let last = *incs.last().expect("four increments");
    let r_last = *ratios.last().expect("three ratios");
    let r_prev = ratios[ratios.len() - 2];
    let tolerance = 1e-3 * (1.0 + total);
    let remaining = if negligible(last) {
        0.0
    } else if r_last < 1.0 {
        last * r_last / (1.0 - r_last)
    } else {
        f64::INFINITY
    };
    let verdict = if (negligible(last) || r_last <= 0.6) && remaining <= tolerance {
        Verdict::Pass
    } else if r_last > 0.6 && r_prev > 0.6 {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(AssumptionReport {
        assumption: Assumption::A,
        verdict,
        witness_grid: witnesses(family, theta0, &last_probes),
        max_violation: remaining,
        tolerance,
        detail: format!("envelope integrals under probe refinement: {totals:?}"),
    })
}

/// `P(A)` for the probe sets used by the discrete check, plus the partial
/// sums `Σ_{j<x} (I_A(j) − P(A)) g(j)` computed from the nearer tail.
struct DiscreteSet {
    members: Box<dyn Fn(i64) -> bool>,
    label: String,
}

fn centered_partial(family: &ParametricFamily, theta: &[f64], set: &DiscreteSet, p_a: f64, x: i64) -> Result<f64> {
    let Support::Discrete(s) = family.support(theta) else { unreachable!() };
    if x <= s.lo {
        return Ok(0.0);
    }
    let l = |j: i64| ((set.members)(j) as u8 as f64 - p_a) * family.density(j as f64, theta);
    if x - s.lo <= 64 {
        let mut acc = 0.0;
        for j in s.lo..x {
            acc += l(j);
        }
        return Ok(acc);
    }
    let tail = IntRange { lo: x, hi: s.hi };
    let lead = family.density(x as f64, theta).max(1e-300);
    Ok(-sum_series(l, tail, lead * 1e-16)?.value)
}

fn check_a_prime(
    family: &ParametricFamily,
    theta0: &[f64],
    radius: Option<f64>,
    grid: ProbeSpec,
) -> Result<AssumptionReport> {
    if family.kind() != Kind::Discrete {
        return Err(SteinError::Incompatible("assumption A' concerns discrete families".into()));
    }
    let Support::Discrete(s) = family.support(theta0) else { unreachable!() };
    let median = family.quantile(0.5, theta0)? as i64;
    let sets = [
        DiscreteSet { members: Box::new(|j| j == 0), label: "{0}".into() },
        DiscreteSet { members: Box::new(|j| j == 1), label: "{1}".into() },
        DiscreteSet { members: Box::new(move |j| j <= median), label: format!("(-inf, {median}]") },
    ];
    let probes = theta_probes(family, theta0, radius, grid.theta_probes);
    let mut p_sets = Vec::new();
    for set in &sets {
        let mut acc = 0.0;
        let cap = s.hi.unwrap_or(median.max(1) * 50 + 200);
        for j in s.lo..=cap.min(s.lo + 100_000) {
            if (set.members)(j) {
                acc += family.density(j as f64, theta0);
            }
        }
        p_sets.push(acc);
    }
    let mut witness = Vec::new();
    let mut first_err: Option<SteinError> = None;
    let term = |x: i64| -> f64 {
        let q = |x: i64, t: &[f64], set: &DiscreteSet, p: f64| -> Result<f64> {
            if x <= 0 {
                return Ok(0.0);
            }
            let base = family.psi(x, theta0)?;
            if base == 0.0 {
                return if s.contains(x) { Err(SteinError::DegeneratePsi { x }) } else { Ok(0.0) };
            }
            Ok(family.psi(x, t)? / base * centered_partial(family, theta0, set, p, x)?)
        };
        let mut env = 0.0f64;
        for t in &probes {
            for (set, &p) in sets.iter().zip(&p_sets) {
                match (q(x + 1, t, set, p), q(x, t, set, p)) {
                    (Ok(a), Ok(b)) => env = env.max((a - b).abs()),
                    _ => return f64::NAN,
                }
            }
        }
        env
    };
    let range = IntRange { lo: s.lo, hi: s.hi };
    let result = sum_series(&term, range, 1e-12);
    for x in family.probe_points(theta0, 8).unwrap_or_default() {
        witness.push((x, theta0[0]));
    }
    let labels: Vec<&str> = sets.iter().map(|s| s.label.as_str()).collect();
    let (verdict, max_violation, detail) = match result {
        Ok(r) => (Verdict::Pass, 0.0, format!("envelope sums to {} over sets {labels:?}", r.value)),
        Err(NumericError::Divergence { partial, reason }) => {
            (Verdict::Fail, f64::INFINITY, format!("envelope not summable ({reason}); partial {}", partial.value))
        }
        Err(e) => {
            first_err.get_or_insert(e.clone().into());
            (Verdict::Inconclusive, f64::NAN, format!("envelope not evaluable: {e}"))
        }
    };
    Ok(AssumptionReport {
        assumption: Assumption::APrime,
        verdict,
        witness_grid: witness,
        max_violation,
        tolerance: 0.0,
        detail,
    })
}

fn check_b(family: &ParametricFamily, theta0: &[f64]) -> Result<AssumptionReport> {
    let support = family.support(theta0);
    let mut worst = 0.0f64;
    let mut witness = Vec::new();
    for level in [0.25, 0.5, 0.75] {
        let q = family.quantile(level, theta0)?;
        let below = match support {
            Support::Continuous(_) => Support::Continuous(Interval { lo: f64::NEG_INFINITY, hi: q }),
            Support::Discrete(_) => Support::Discrete(IntRange { lo: i64::MIN / 4, hi: Some(q as i64) }),
        };
        let p = family.prob(&below, theta0)?.value;
        // F(x) = (1 − P) cdf(x) left of q and P · sf(x) right of q
        let centered = |x: f64| -> f64 {
            let region = |lo: f64, hi: f64| match support {
                Support::Continuous(_) => Support::Continuous(Interval { lo, hi }),
                Support::Discrete(_) => Support::Discrete(IntRange {
                    lo: lo.max(-9.0e15) as i64,
                    hi: hi.is_finite().then_some(hi as i64),
                }),
            };
            let r = if x <= q {
                family.prob(&region(f64::NEG_INFINITY, x), theta0).map(|m| (1.0 - p) * m.value)
            } else {
                let start = if family.kind() == Kind::Discrete { x + 1.0 } else { x };
                family.prob(&region(start, f64::INFINITY), theta0).map(|m| p * m.value)
            };
            r.unwrap_or(f64::NAN)
        };
        let outer = match support {
            Support::Continuous(iv) => {
                let opts = QuadratureOptions::with_tol(Tolerances { abs: 1e-9, rel: 1e-7 }).breakpoints(vec![q]);
                integrate_with(centered, iv, &opts)
            }
            Support::Discrete(r) => sum_series(|k| centered(k as f64), r, 1e-10),
        };
        witness.push((q, theta0[0]));
        match outer {
            Ok(v) => worst = worst.max(v.value.abs()),
            Err(NumericError::Divergence { partial, reason }) => {
                return Ok(AssumptionReport {
                    assumption: Assumption::B,
                    verdict: Verdict::Fail,
                    witness_grid: witness,
                    max_violation: f64::INFINITY,
                    tolerance: 0.0,
                    detail: format!("outer integral diverges for A = (-inf, {q}] ({reason}); partial {}", partial.value),
                });
            }
            Err(e) => {
                return Ok(AssumptionReport {
                    assumption: Assumption::B,
                    verdict: Verdict::Inconclusive,
                    witness_grid: witness,
                    max_violation: f64::NAN,
                    tolerance: 0.0,
                    detail: format!("outer integral not evaluable for A = (-inf, {q}]: {e}"),
                });
            }
        }
    }
    Ok(AssumptionReport {
        assumption: Assumption::B,
        verdict: Verdict::Pass,
        witness_grid: witness,
        max_violation: worst,
        tolerance: f64::INFINITY,
        detail: format!("largest outer integral over half-line probe sets: {worst}"),
    })
}

#[allow(dead_code)]
fn radius_for(theta0: f64, radius: Option<f64>) -> f64 {
    radius.unwrap_or_else(|| default_radius(theta0))
}
