//! Zero-expectation checks under the target and discrimination of
//! alternatives through solved test functions.

mod report;

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinError};
use crate::families::{Kind, ParametricFamily, Support, Verdict as ConditionVerdict};
use crate::numerics::{integrate_with, sum_series, Interval, NumericReport, QuadratureOptions, Tolerances};
use crate::operators::{Flavor, NamedKind, SteinOperator};
use crate::solver::{solve, EventSet};
use crate::test_functions::{check_conditions, ConditionReport, TestFunction};

pub use report::render_markdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Characterized,
    Violated,
    Inconclusive,
}

/// Thresholds for the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// `|E|` at or below `max(zero_tol, 10·err)` counts as zero
    pub zero_tol: f64,
    /// `|E|` above `max(violation_floor, 10·err)` counts as a violation
    pub violation_floor: f64,
    pub quadrature: Tolerances,
}

impl Default for Settings {
    fn default() -> Self {
        Self { zero_tol: 1e-8, violation_floor: 1e-6, quadrature: Tolerances { abs: 1e-13, rel: 1e-11 } }
    }
}

impl Settings {
    fn is_zero(&self, v: f64, err: f64) -> bool {
        v.abs() <= self.zero_tol.max(10.0 * err)
    }

    fn is_violation(&self, v: f64, err: f64) -> bool {
        v.abs() > self.violation_floor.max(10.0 * err)
    }
}

/// A law to integrate against: a family at a parameter value.
#[derive(Debug, Clone)]
pub struct Law {
    pub family: ParametricFamily,
    pub theta: Vec<f64>,
}

impl Law {
    pub fn new(family: ParametricFamily, theta: Vec<f64>) -> Result<Self> {
        family.validate_theta(&theta)?;
        Ok(Self { family, theta })
    }

    pub fn label(&self) -> String {
        format!("{} at theta = {:?}", self.family.label(), self.theta)
    }

    fn density(&self, x: f64) -> f64 {
        self.family.density(x, &self.theta)
    }

    fn support(&self) -> Support {
        self.family.support(&self.theta)
    }
}

/// `E_law[T f]`: the integral (or sum) of the operator's interior part
/// against the law over the common support, plus the operator's boundary
/// functional.
pub fn expectation_of_operator(law: &Law, op: &SteinOperator, f: &TestFunction) -> Result<NumericReport> {
    expectation_with(law, op, f, &[], Settings::default().quadrature)
}

/// As [`expectation_of_operator`], with extra quadrature breakpoints where
/// `f` or its derivative jumps.
pub fn expectation_with(
    law: &Law,
    op: &SteinOperator,
    f: &TestFunction,
    breakpoints: &[f64],
    tol: Tolerances,
) -> Result<NumericReport> {
    let target = op.family().support(op.theta0());
    let failure: RefCell<Option<SteinError>> = RefCell::new(None);
    let keep = |r: Result<f64>| match r {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let report = match (law.support(), target) {
        (Support::Continuous(a), Support::Continuous(b)) => {
            let Some(dom) = a.intersect(&b).filter(|d| d.lo < d.hi) else {
                return Ok(NumericReport { value: 0.0, abs_error_estimate: 0.0, evaluations: 0 });
            };
            let integrand = |x: f64| {
                let h = law.density(x);
                if h == 0.0 {
                    0.0
                } else {
                    keep(op.interior_apply(f, x)) * h
                }
            };
            let r = integrate_pieces(integrand, dom, breakpoints, tol);
            if let Some(e) = failure.take() {
                return Err(e);
            }
            let mut r = r?;
            r.value += op.boundary_functional(f, &|x| law.density(x))?;
            r
        }
        (Support::Discrete(a), Support::Discrete(b)) => {
            let Some(dom) = a.intersect(&b) else {
                return Ok(NumericReport { value: 0.0, abs_error_estimate: 0.0, evaluations: 0 });
            };
            let term = |k: i64| {
                let h = law.density(k as f64);
                if h == 0.0 {
                    0.0
                } else {
                    keep(op.apply(f, k as f64)) * h
                }
            };
            let r = sum_series(term, dom, tol.abs);
            if let Some(e) = failure.take() {
                return Err(e);
            }
            r?
        }
        _ => return Err(SteinError::Incompatible("law and operator have different support kinds".into())),
    };
    if !report.value.is_finite() {
        return Err(SteinError::Input(format!("expectation of {} is not finite", f.label())));
    }
    Ok(report)
}

/// Splits at the breakpoints; bounded pieces go through `x = a + w t²(3 − 2t)`
/// so that inverse square-root singularities at the ends become smooth.
fn integrate_pieces(f: impl Fn(f64) -> f64, dom: Interval, breaks: &[f64], tol: Tolerances) -> Result<NumericReport> {
    let mut cuts = vec![dom.lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&b| dom.contains_interior(b) && b.is_finite()).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(dom.hi);
    let opts = QuadratureOptions::with_tol(tol);
    let mut total = NumericReport { value: 0.0, abs_error_estimate: 0.0, evaluations: 0 };
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let piece = Interval { lo: a, hi: b };
        let r = if piece.is_bounded() {
            let width = b - a;
            let mapped = |t: f64| {
                let x = a + width * t * t * (3.0 - 2.0 * t);
                let jac = 6.0 * width * t * (1.0 - t);
                if jac == 0.0 {
                    0.0
                } else {
                    f(x) * jac
                }
            };
            integrate_with(mapped, Interval { lo: 0.0, hi: 1.0 }, &opts)?
        } else {
            integrate_with(&f, piece, &opts)?
        };
        total.value += r.value;
        total.abs_error_estimate += r.abs_error_estimate;
        total.evaluations += r.evaluations;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Zero,
    Violated,
    /// above the zero tolerance but below the violation floor
    Unresolved,
    /// failed an admissibility condition; not counted
    Excluded,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityEntry {
    pub label: String,
    pub expectation: Option<f64>,
    pub abs_error: Option<f64>,
    pub status: EntryStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberConditions {
    pub label: String,
    pub reports: Vec<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityFragment {
    pub entries: Vec<NecessityEntry>,
    pub conditions: Vec<MemberConditions>,
}

/// Checks conditions, then `E_{θ0}[T f]` for every battery member.
pub fn verify_necessity(op: &SteinOperator, battery: &[TestFunction], settings: &Settings) -> NecessityFragment {
    let law = Law { family: op.family().clone(), theta: op.theta0().to_vec() };
    let mut rows: Vec<(NecessityEntry, MemberConditions)> =
        battery.par_iter().map(|f| necessity_row(&law, op, f, settings)).collect();
    rows.sort_by(|a, b| a.0.label.cmp(&b.0.label));
    let (entries, conditions) = rows.into_iter().unzip();
    NecessityFragment { entries, conditions }
}

fn necessity_row(law: &Law, op: &SteinOperator, f: &TestFunction, s: &Settings) -> (NecessityEntry, MemberConditions) {
    let label = f.label().to_string();
    let (reports, note) = match conditions_for(op, f) {
        Ok(r) => (r, None),
        Err(e) => (vec![], Some(format!("conditions not checked: {e}"))),
    };
    let conds = MemberConditions { label: label.clone(), reports, note };
    if let Some(bad) = conds.reports.iter().find(|r| r.verdict == ConditionVerdict::Fail) {
        let entry = NecessityEntry {
            label,
            expectation: None,
            abs_error: None,
            status: EntryStatus::Excluded,
            note: Some(format!("condition {} fails: {}", bad.condition, bad.detail)),
        };
        return (entry, conds);
    }
    let entry = match expectation_with(law, op, f, &[], s.quadrature) {
        Ok(r) => NecessityEntry {
            label,
            expectation: Some(r.value),
            abs_error: Some(r.abs_error_estimate),
            status: classify(r.value, r.abs_error_estimate, s),
            note: None,
        },
        Err(e) => NecessityEntry {
            label,
            expectation: None,
            abs_error: None,
            status: EntryStatus::Error,
            note: Some(e.to_string()),
        },
    };
    (entry, conds)
}

fn classify(v: f64, err: f64, s: &Settings) -> EntryStatus {
    if s.is_zero(v, err) {
        EntryStatus::Zero
    } else if s.is_violation(v, err) {
        EntryStatus::Violated
    } else {
        EntryStatus::Unresolved
    }
}

fn conditions_for(op: &SteinOperator, f: &TestFunction) -> Result<Vec<ConditionReport>> {
    match op.named_kind() {
        Some(NamedKind::DensityApproach) => {
            Err(SteinError::Capability("the density-approach operator has no parameter embedding".into()))
        }
        _ => check_conditions(op.family(), op.theta0(), f, op.flavor()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyEntry {
    pub set: EventSet,
    pub alternative: String,
    /// measured `E_alt[T f_A]`, conditional on `S_θ0` when flagged
    pub discrimination: Option<f64>,
    pub abs_error: Option<f64>,
    /// `P_alt(A | S_θ0) − P_θ0(A)`
    pub predicted: Option<f64>,
    pub conditional: bool,
    pub operator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SufficiencyEntry {
    fn consistent(&self, s: &Settings) -> bool {
        match (self.discrimination, self.predicted, self.abs_error) {
            (Some(d), Some(p), Some(e)) => (d - p).abs() <= s.violation_floor.max(10.0 * e),
            _ => false,
        }
    }
}

/// For each `A`, solves the Stein equation for `l_A` and integrates the
/// operator applied to `f_A` against the alternative.
pub fn verify_sufficiency(
    op: &SteinOperator,
    alternative: &Law,
    sets: &[EventSet],
    settings: &Settings,
) -> Vec<SufficiencyEntry> {
    let mut out: Vec<SufficiencyEntry> =
        sets.par_iter().map(|set| sufficiency_row(op, alternative, set, settings)).collect();
    out.sort_by(|a, b| a.set.to_string().cmp(&b.set.to_string()));
    out
}

fn sufficiency_row(op: &SteinOperator, alt: &Law, set: &EventSet, s: &Settings) -> SufficiencyEntry {
    let mut entry = SufficiencyEntry {
        set: set.clone(),
        alternative: alt.label(),
        discrimination: None,
        abs_error: None,
        predicted: None,
        conditional: false,
        operator: op.label(),
        error: None,
    };
    match discriminate(op, alt, set, s, &mut entry) {
        Ok(()) => {}
        Err(e) => entry.error = Some(e.to_string()),
    }
    entry
}

fn discriminate(op: &SteinOperator, alt: &Law, set: &EventSet, s: &Settings, entry: &mut SufficiencyEntry) -> Result<()> {
    let (family, theta0) = (op.family(), op.theta0());
    let sol = solve(family, theta0, set)?;
    let (op_used, tf) = match sol.test_function_for(op) {
        Ok(tf) => (op.clone(), tf),
        Err(SteinError::Incompatible(_)) => {
            let fallback = match family.kind() {
                Kind::Continuous => SteinOperator::named(family.clone(), NamedKind::DensityApproach, theta0.to_vec())?,
                Kind::Discrete => SteinOperator::new(family.clone(), Flavor::Discrete, theta0.to_vec())?,
            };
            let tf = sol.test_function_for(&fallback)?;
            (fallback, tf)
        }
        Err(e) => return Err(e),
    };
    entry.operator = op_used.label();
    let target = family.support(theta0);
    let inside = alt.family.prob(&target, &alt.theta)?.value;
    if inside <= 0.0 {
        return Err(SteinError::Conditioning { u: alt.theta[0] });
    }
    entry.conditional = !alt.support().is_subset_of(&target);
    let norm = if entry.conditional { inside } else { 1.0 };
    let r = expectation_with(alt, &op_used, &tf, &set.boundaries(), s.quadrature)?;
    entry.discrimination = Some(r.value / norm);
    entry.abs_error = Some(r.abs_error_estimate / norm);
    let alt_mass = set.mass_within(&alt.family, &alt.theta, &target)?;
    entry.predicted = Some(alt_mass / norm - sol.target_mass());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta: f64,
    pub expectation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `δ ↦ E_{θ0+δ}[T_{θ0} f]` along the first parameter coordinate.
pub fn discrimination_curve(op: &SteinOperator, f: &TestFunction, deltas: &[f64]) -> Vec<CurvePoint> {
    deltas
        .par_iter()
        .map(|&delta| {
            let mut theta = op.theta0().to_vec();
            theta[0] += delta;
            let r = Law::new(op.family().clone(), theta).and_then(|law| expectation_of_operator(&law, op, f));
            match r {
                Ok(r) => CurvePoint { delta, expectation: Some(r.value), error: None },
                Err(e) => CurvePoint { delta, expectation: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub family: String,
    pub theta0: Vec<f64>,
    pub flavor: Flavor,
    pub operator: String,
    pub closed_form: String,
    pub necessity: Vec<NecessityEntry>,
    pub sufficiency: Vec<SufficiencyEntry>,
    pub conditions: Vec<MemberConditions>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

const FINITE_BATTERY_NOTE: &str =
    "a finite battery can refute the zero-expectation identity but cannot establish it for every admissible f";

/// Runs necessity over `battery` and sufficiency for `alternative` (if any)
/// over `sets`, and settles the verdict.
pub fn characterize(
    op: &SteinOperator,
    battery: &[TestFunction],
    alternative: Option<&Law>,
    sets: &[EventSet],
    settings: &Settings,
) -> CharacterizationReport {
    let nec = verify_necessity(op, battery, settings);
    let suff = match alternative {
        Some(alt) => verify_sufficiency(op, alt, sets, settings),
        None => vec![],
    };
    let mut notes = vec![FINITE_BATTERY_NOTE.to_string()];
    if suff.iter().any(|e| e.conditional) {
        notes.push("conditional verdict: the alternative puts mass outside the target support".into());
    }
    let verdict = settle(&nec.entries, &suff, settings);
    CharacterizationReport {
        family: op.family().label(),
        theta0: op.theta0().to_vec(),
        flavor: op.flavor(),
        operator: op.label(),
        closed_form: op.closed_form_text(),
        necessity: nec.entries,
        sufficiency: suff,
        conditions: nec.conditions,
        verdict,
        notes,
    }
}

fn settle(nec: &[NecessityEntry], suff: &[SufficiencyEntry], s: &Settings) -> Verdict {
    let suff_violation = suff.iter().any(|e| match (e.discrimination, e.abs_error) {
        (Some(d), Some(err)) => s.is_violation(d, err),
        _ => false,
    });
    if suff_violation || nec.iter().any(|e| e.status == EntryStatus::Violated) {
        return Verdict::Violated;
    }
    let counted = nec.iter().filter(|e| e.status != EntryStatus::Excluded).count();
    let clean = nec.iter().all(|e| matches!(e.status, EntryStatus::Zero | EntryStatus::Excluded))
        && suff.iter().all(|e| e.consistent(s));
    if counted == 0 || !clean {
        Verdict::Inconclusive
    } else {
        Verdict::Characterized
    }
}

impl CharacterizationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        render_markdown(self)
    }
}

#[cfg(test)]
mod tests;
