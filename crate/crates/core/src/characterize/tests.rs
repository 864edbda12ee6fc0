use statrs::distribution::{ContinuousCDF, Normal};

use super::*;
use crate::families::{builtin, BUILTIN_NAMES};
use crate::numerics::{integrate, Interval};
use crate::operators::default_flavor;
use crate::test_functions::{polynomial_battery, precompose_semicircle, Damping};

fn op_for(name: &str, flavor: Flavor) -> SteinOperator {
    let fam = builtin(name, &[]).unwrap();
    let t0 = fam.default_theta0().to_vec();
    SteinOperator::new(fam, flavor, t0).unwrap()
}

fn at_target(op: &SteinOperator) -> Law {
    Law::new(op.family().clone(), op.theta0().to_vec()).unwrap()
}

fn identity() -> TestFunction {
    TestFunction::new("x", |x| x).with_derivative(|_| 1.0)
}

#[test]
fn printed_identities_vanish() {
    for (name, flavor) in [("gaussian_loc", Flavor::Location), ("exponential_scale", Flavor::Scale)] {
        let op = op_for(name, flavor);
        let e = expectation_of_operator(&at_target(&op), &op, &identity()).unwrap();
        assert!(e.value.abs() <= 1e-8, "{name}: {}", e.value);
    }
    // exponential location: −λ f(0+) boundary term
    let op = op_for("exponential_loc", Flavor::Location);
    let f = TestFunction::new("1+x", |x| 1.0 + x).with_derivative(|_| 1.0);
    assert!(expectation_of_operator(&at_target(&op), &op, &f).unwrap().value.abs() <= 1e-8);
    // uniform location: f(b−) − f(a+)
    let fam = builtin("uniform_loc", &[]).unwrap();
    let op = SteinOperator::named(fam, NamedKind::UniformLocation, vec![0.0]).unwrap();
    let f = TestFunction::new("x^2", |x| x * x).with_derivative(|x| 2.0 * x);
    assert!(expectation_of_operator(&at_target(&op), &op, &f).unwrap().value.abs() <= 1e-8);
}

#[test]
fn semicircle_identity_with_moment_cross_check() {
    let op = op_for("semicircle_loc", Flavor::Location);
    let f0 = precompose_semicircle(&identity(), 2.0);
    let e = expectation_of_operator(&at_target(&op), &op, &f0).unwrap();
    assert!(e.value.abs() <= 1e-8, "{}", e.value);
    let fam = op.family();
    let m2 = integrate(|x| x * x * fam.density(x, &[0.0]), Interval::new(-2.0, 2.0).unwrap(), 1e-13, 1e-12)
        .unwrap()
        .value;
    assert!((4.0 - 4.0 * m2).abs() <= 1e-8);
}

#[test]
fn necessity_for_all_builtins() {
    let battery = polynomial_battery(3, Damping::Gaussian);
    for name in BUILTIN_NAMES {
        let fam = builtin(name, &[]).unwrap();
        let op = SteinOperator::default_for(fam).unwrap();
        let frag = verify_necessity(&op, &battery, &Settings::default());
        let counted: Vec<_> = frag.entries.iter().filter(|e| e.status != EntryStatus::Excluded).collect();
        assert!(!counted.is_empty(), "{name}: everything excluded");
        for e in counted {
            assert_eq!(e.status, EntryStatus::Zero, "{name} {}: {:?} {:?}", e.label, e.expectation, e.note);
        }
    }
}

#[test]
fn gaussian_scale_damped_battery() {
    let op = op_for("gaussian_scale", Flavor::Scale);
    let r = characterize(&op, &polynomial_battery(3, Damping::Gaussian), None, &[], &Settings::default());
    assert_eq!(r.verdict, Verdict::Characterized);
    assert!(r.necessity.iter().all(|e| e.expectation.unwrap().abs() <= 1e-8));
}

#[test]
fn binomial_sums_are_exact() {
    let op = op_for("binomial_p", Flavor::Discrete);
    let frag = verify_necessity(&op, &polynomial_battery(2, Damping::None), &Settings::default());
    assert_eq!(frag.entries.len(), 3);
    for e in &frag.entries {
        assert!(e.expectation.unwrap_or(f64::NAN).abs() <= 1e-10, "{}: {:?} {:?}", e.label, e.expectation, e.note);
    }
}

#[test]
fn empty_battery_is_inconclusive() {
    let op = op_for("gaussian_loc", Flavor::Location);
    let r = characterize(&op, &[], None, &[], &Settings::default());
    assert_eq!(r.verdict, Verdict::Inconclusive);
    // a member that fails condition (i) is excluded, leaving nothing counted
    let wild = TestFunction::new("exp(x^2)", |x| (x * x).exp());
    let r = characterize(&op, &[wild], None, &[], &Settings::default());
    assert_eq!(r.necessity[0].status, EntryStatus::Excluded);
    assert_eq!(r.verdict, Verdict::Inconclusive);
}

#[test]
fn gaussian_alternative_is_discriminated() {
    let op = op_for("gaussian_loc", Flavor::Location);
    let alt = Law::new(builtin("gaussian_loc", &[]).unwrap(), vec![0.5]).unwrap();
    let entries = verify_sufficiency(&op, &alt, &[EventSet::half_line(0.0)], &Settings::default());
    let n = Normal::standard();
    let oracle = n.cdf(-0.5) - n.cdf(0.0);
    let d = entries[0].discrimination.unwrap();
    assert!((d - oracle).abs() <= 1e-6, "{d} vs {oracle}");
    assert!((d + 0.191_462_5).abs() <= 1e-6);
    assert!(!entries[0].conditional);
    let r = characterize(&op, &polynomial_battery(2, Damping::Gaussian), Some(&alt), &[EventSet::half_line(0.0)], &Settings::default());
    assert_eq!(r.verdict, Verdict::Violated);
}

#[test]
fn target_as_alternative_gives_zero() {
    let op = op_for("gaussian_loc", Flavor::Location);
    let sets = [EventSet::half_line(0.0), EventSet::half_line(-1.2), EventSet::Interval { lo: Some(-0.5), hi: Some(2.0) }];
    let entries = verify_sufficiency(&op, &at_target(&op), &sets, &Settings::default());
    for e in &entries {
        assert!(e.discrimination.unwrap().abs() <= 1e-8, "{}: {:?}", e.set, e.discrimination);
    }
    let r = characterize(&op, &polynomial_battery(2, Damping::Gaussian), Some(&at_target(&op)), &sets, &Settings::default());
    assert_eq!(r.verdict, Verdict::Characterized);
}

#[test]
fn poisson_alternative_is_discriminated() {
    let op = op_for("poisson_lambda", Flavor::Discrete);
    let alt = Law::new(op.family().clone(), vec![1.2]).unwrap();
    let entries = verify_sufficiency(&op, &alt, &[EventSet::points([0])], &Settings::default());
    let oracle = (-1.2f64).exp() - (-1.0f64).exp();
    let d = entries[0].discrimination.unwrap();
    assert!((d - oracle).abs() <= 1e-9, "{d} vs {oracle}");
    assert!((d + 0.066_685_2).abs() <= 1e-7);
}

#[test]
fn sufficiency_matches_mass_differences() {
    let cases: [(&str, Flavor, f64, EventSet); 4] = [
        ("gaussian_loc", Flavor::Location, -0.3, EventSet::half_line(0.4)),
        ("exponential_scale", Flavor::Scale, 1.3, EventSet::half_line(0.8)),
        ("geometric_p", Flavor::Discrete, 0.4, EventSet::points([0, 2])),
        ("binomial_p", Flavor::Discrete, 0.35, EventSet::half_line(3.0)),
    ];
    for (name, flavor, theta, set) in cases {
        let op = op_for(name, flavor);
        let alt = Law::new(op.family().clone(), vec![theta]).unwrap();
        let e = &verify_sufficiency(&op, &alt, &[set], &Settings::default())[0];
        let (d, p) = (e.discrimination.unwrap(), e.predicted.unwrap());
        assert!((d - p).abs() <= 1e-6, "{name}: {d} vs {p} ({:?})", e.error);
    }
}

#[test]
fn moving_support_gives_conditional_verdict() {
    let op = op_for("exponential_loc", Flavor::Location);
    let alt = Law::new(op.family().clone(), vec![-0.5]).unwrap();
    let e = &verify_sufficiency(&op, &alt, &[EventSet::half_line(1.0)], &Settings::default())[0];
    assert!(e.conditional);
    // X | X ≥ 0 under a shifted exponential is the target again
    assert!(e.discrimination.unwrap().abs() <= 1e-8, "{:?}", e.discrimination);
    assert!(e.predicted.unwrap().abs() <= 1e-12);
}

#[test]
fn discrimination_curves() {
    let one = TestFunction::new("1", |_| 1.0).with_derivative(|_| 0.0);
    let op = op_for("gaussian_loc", Flavor::Location);
    let pts = discrimination_curve(&op, &one, &[-0.4, 0.0, 0.1, 0.7]);
    for p in &pts {
        assert!((p.expectation.unwrap() - p.delta).abs() <= 1e-9, "{p:?}");
    }
    let op = op_for("poisson_lambda", Flavor::Discrete);
    let pts = discrimination_curve(&op, &one, &[0.0, 0.1]);
    assert!(pts[0].expectation.unwrap().abs() <= 1e-12);
    let want = std::f64::consts::E * (1.0 - 1.1);
    assert!((pts[1].expectation.unwrap() - want).abs() <= 1e-9);
    assert!((want + 0.271_828_2).abs() < 1e-7);
}

#[test]
fn gaussian_coordinate_slice_vanishes() {
    let fam = builtin("gaussian_multiv_coord", &[]).unwrap();
    let op = SteinOperator::new(fam.clone(), default_flavor(&fam), vec![0.0]).unwrap();
    let frag = verify_necessity(&op, &polynomial_battery(2, Damping::Gaussian), &Settings::default());
    assert!(frag.entries.iter().all(|e| e.status == EntryStatus::Zero));
}

#[test]
fn report_serializes_and_renders() {
    let op = op_for("poisson_lambda", Flavor::Discrete);
    let alt = Law::new(op.family().clone(), vec![1.2]).unwrap();
    let r = characterize(&op, &polynomial_battery(1, Damping::None), Some(&alt), &[EventSet::points([0])], &Settings::default());
    let back: CharacterizationReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    let md = r.to_markdown();
    assert!(md.contains("verdict: **violated**"));
    assert!(md.contains("e^lambda0"));
    assert!(md.contains("| {0} |"));
}
