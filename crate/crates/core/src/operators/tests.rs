use std::f64::consts::E;

use proptest::prelude::*;

use super::*;
use crate::families::builtin;
use crate::test_functions::{polynomial_battery, precompose_semicircle, Damping};

fn id() -> TestFunction {
    TestFunction::new("x", |x| x).with_derivative(|_| 1.0)
}

fn one() -> TestFunction {
    TestFunction::new("1", |_| 1.0).with_derivative(|_| 0.0)
}

fn op(name: &str, params: &[f64], flavor: Flavor, theta0: f64) -> SteinOperator {
    SteinOperator::new(builtin(name, params).unwrap(), flavor, vec![theta0]).unwrap()
}

fn interior_grid(fam: &ParametricFamily, theta0: &[f64], n: usize) -> Vec<f64> {
    match fam.kind() {
        Kind::Continuous => (0..n).map(|i| fam.quantile(0.01 + 0.98 * i as f64 / (n - 1) as f64, theta0).unwrap()).collect(),
        Kind::Discrete => (0..n as i64).map(|k| k as f64).filter(|&k| fam.in_support(k, theta0)).collect(),
    }
}

#[test]
fn generic_gaussian_location_example() {
    let o = op("gaussian_loc", &[], Flavor::Location, 0.0);
    let f = TestFunction::new("x", |x| x).with_two_arg(|x, t| x - t[0]);
    let g = SteinOperator::new(o.family().clone(), Flavor::Generic, vec![0.0]).unwrap();
    assert!((g.generic_apply(&f, 2.0).unwrap()[0] - 3.0).abs() < 1e-8);
    assert_eq!(g.apply(&TestFunction::zero(), 1.3).unwrap(), 0.0);
}

#[test]
fn generic_poisson_example() {
    let fam = builtin("poisson_lambda", &[]).unwrap();
    let g = SteinOperator::new(fam, Flavor::Generic, vec![1.0]).unwrap();
    let f = TestFunction::new("poisson form", |x| x).with_two_arg(|x, t| {
        let l = t[0];
        l.exp() * (l * (x + 1.0) / (x + 1.0) - x)
    });
    assert!((g.apply(&f, 2.0).unwrap() + E).abs() < 1e-7);
}

#[test]
fn location_examples() {
    assert!((op("gaussian_loc", &[], Flavor::Location, 0.0).apply(&id(), 2.0).unwrap() - 3.0).abs() < 1e-12);
    assert!(op("exponential_loc", &[], Flavor::Location, 0.0).apply(&id(), 1.0).unwrap().abs() < 1e-12);
    let semi = op("semicircle_loc", &[], Flavor::Location, 0.0);
    let f0 = precompose_semicircle(&id(), 2.0);
    let printed = |x: f64| (4.0 - x * x) - 3.0 * x * x;
    let v = semi.apply(&f0, 1.0).unwrap();
    assert!(v.abs() < 1e-12 && printed(1.0).abs() < 1e-12, "{v}");
    for x in [-1.5, -0.3, 0.7, 1.9] {
        assert!((semi.apply(&f0, x).unwrap() + printed(x)).abs() < 1e-9);
    }
}

#[test]
fn scale_examples() {
    assert!((op("gaussian_scale", &[], Flavor::Scale, 1.0).apply(&id(), 2.0).unwrap() + 4.0).abs() < 1e-12);
    assert!((op("exponential_scale", &[], Flavor::Scale, 1.0).apply(&one(), 3.0).unwrap() + 2.0).abs() < 1e-12);
    assert_eq!(op("exponential_scale", &[], Flavor::Scale, 1.0).apply(&TestFunction::zero(), 3.0).unwrap(), 0.0);
}

#[test]
fn discrete_examples() {
    assert!((op("poisson_lambda", &[], Flavor::Discrete, 1.0).apply(&id(), 1.0).unwrap() - E).abs() < 1e-12);
    assert!((op("geometric_p", &[], Flavor::Discrete, 0.5).apply(&one(), 0.0).unwrap() + 2.0).abs() < 1e-12);
    assert!((op("binomial_p", &[2.0], Flavor::Discrete, 0.5).apply(&one(), 2.0).unwrap() + 32.0).abs() < 1e-9);
}

#[test]
fn named_examples() {
    let u = SteinOperator::new(builtin("uniform_a", &[1.0]).unwrap(), Flavor::Named, vec![0.0]).unwrap();
    assert!(u.apply(&id(), 0.5).unwrap().abs() < 1e-14);
    let s = SteinOperator::new(builtin("student_nu", &[]).unwrap(), Flavor::Named, vec![3.0]).unwrap();
    assert!((s.apply(&one(), 0.0).unwrap() + 0.1477).abs() < 1e-3);
    // nbar = 7, pbar = 0.8, p = 0.4: the bracket at x = 3 is 4 f(4) - 3 f(3)
    let m = SteinOperator::new(builtin("multinomial_p1_slice", &[]).unwrap(), Flavor::Named, vec![0.4]).unwrap();
    let f = TestFunction::new("tuned", |x| if x == 4.0 { 3.0 / 4.0 } else { 1.0 });
    assert!(m.apply(&f, 3.0).unwrap().abs() < 1e-12);
}

#[test]
fn multinomial_printed_form_differs_by_pbar_power() {
    let fam = builtin("multinomial_p1_slice", &[]).unwrap();
    let named = SteinOperator::new(fam.clone(), Flavor::Named, vec![0.3]).unwrap();
    let disc = SteinOperator::new(fam, Flavor::Discrete, vec![0.3]).unwrap();
    let (n, p_bar) = (7.0, 0.8f64);
    for f in polynomial_battery(2, Damping::None) {
        for x in 0..=7 {
            let a = named.apply(&f, x as f64).unwrap();
            let b = disc.apply(&f, x as f64).unwrap();
            assert!((b - p_bar.powf(n) * a).abs() < 1e-9 * (1.0 + b.abs()), "x={x}: {a} {b}");
        }
    }
}

#[test]
fn multivariate_examples() {
    let x1 = |z: &[f64]| z[0];
    assert!(multivariate_gaussian_apply(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0], 0, &x1, &[1.0, 2.0]).unwrap().abs() < 1e-9);
    let zero = |_: &[f64]| 0.0;
    assert_eq!(multivariate_gaussian_apply(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0], 1, &zero, &[1.0, 2.0]).unwrap(), 0.0);
    let c = |_: &[f64]| 1.0;
    let v = multivariate_gaussian_apply(&[0.0, 0.0], &[2.0, 0.0, 0.0, 1.0], 0, &c, &[2.0, 0.0]).unwrap();
    assert!((v + 1.0).abs() < 1e-12);
    assert!(multivariate_gaussian_apply(&[0.0, 0.0], &[1.0, 1.0, 1.0, 1.0], 0, &c, &[2.0, 0.0]).is_err());
}

#[test]
fn zero_outside_support() {
    let f = id();
    assert_eq!(op("exponential_loc", &[], Flavor::Location, 0.0).apply(&f, -0.5).unwrap(), 0.0);
    assert_eq!(op("poisson_lambda", &[], Flavor::Discrete, 1.0).apply(&f, -1.0).unwrap(), 0.0);
    assert_eq!(op("poisson_lambda", &[], Flavor::Discrete, 1.0).apply(&f, 1.5).unwrap(), 0.0);
    assert_eq!(op("binomial_p", &[], Flavor::Discrete, 0.3).apply(&f, 11.0).unwrap(), 0.0);
    assert_eq!(op("semicircle_loc", &[], Flavor::Location, 0.0).apply(&f, 2.5).unwrap(), 0.0);
}

#[test]
fn generic_matches_closed_forms() {
    let cases: [(&str, Flavor); 8] = [
        ("gaussian_loc", Flavor::Location),
        ("gaussian_scale", Flavor::Scale),
        ("exponential_scale", Flavor::Scale),
        ("poisson_lambda", Flavor::Discrete),
        ("geometric_p", Flavor::Discrete),
        ("binomial_p", Flavor::Discrete),
        ("uniform_a", Flavor::Named),
        ("student_nu", Flavor::Named),
    ];
    for (name, flavor) in cases {
        let fam = builtin(name, &[]).unwrap();
        let t0 = fam.default_theta0().to_vec();
        let o = SteinOperator::new(fam.clone(), flavor, t0.clone()).unwrap();
        for f in polynomial_battery(3, Damping::Gaussian) {
            for x in interior_grid(&fam, &t0, 50) {
                let generic = o.generic_apply(&f, x).unwrap()[0];
                let closed = o.closed_form(&f, x).unwrap().unwrap();
                let closed = if name == "uniform_a" { closed + f.eval(0.0) } else { closed };
                assert!((generic - closed).abs() <= 1e-6, "{name} {} x={x}: {generic} vs {closed}", f.label());
                assert!((o.interior_apply(&f, x).unwrap() - closed).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn exchangeability_recipe() {
    for (name, flavor) in [
        ("gaussian_loc", Flavor::Location),
        ("exponential_loc", Flavor::Location),
        ("gaussian_scale", Flavor::Scale),
        ("exponential_scale", Flavor::Scale),
    ] {
        let fam = builtin(name, &[]).unwrap();
        let t0 = fam.default_theta0().to_vec();
        let o = SteinOperator::new(fam.clone(), flavor, t0.clone()).unwrap();
        let grid = interior_grid(&fam, &t0, 50);
        for f in polynomial_battery(3, Damping::Gaussian) {
            let gap = o.exchangeability_gap(&f, &grid).unwrap();
            assert!(gap <= 1e-6, "{name} {}: {gap}", f.label());
        }
    }
}

#[test]
fn boundary_functionals() {
    let f = polynomial_battery(1, Damping::Gaussian).remove(0);
    let e = op("exponential_loc", &[2.0], Flavor::Location, 0.0);
    let law = |x: f64| e.family().density(x, &[0.0]);
    assert!((e.boundary_functional(&f, &law).unwrap() + 2.0 * f.eval(0.0)).abs() < 1e-9);
    let u = SteinOperator::new(builtin("uniform_loc", &[]).unwrap(), Flavor::Named, vec![0.0]).unwrap();
    let law = |x: f64| u.family().density(x, &[0.0]);
    let want = f.eval(0.0) - f.eval(1.0);
    assert!((u.boundary_functional(&f, &law).unwrap() - want).abs() < 1e-9);
    let a = SteinOperator::new(builtin("uniform_a", &[]).unwrap(), Flavor::Named, vec![0.0]).unwrap();
    let law = |x: f64| a.family().density(x, &[0.0]);
    assert!((a.boundary_functional(&id(), &law).unwrap() + 0.0).abs() < 1e-9);
    assert!((a.boundary_functional(&one(), &law).unwrap() + 1.0).abs() < 1e-6);
}

#[test]
fn incompatible_flavors_are_rejected() {
    assert!(SteinOperator::new(builtin("poisson_lambda", &[]).unwrap(), Flavor::Location, vec![1.0]).is_err());
    assert!(SteinOperator::new(builtin("gaussian_loc", &[]).unwrap(), Flavor::Discrete, vec![0.0]).is_err());
    assert!(SteinOperator::new(builtin("student_nu", &[]).unwrap(), Flavor::Named, vec![1.0]).is_err());
    let g = SteinOperator::new(builtin("gaussian_loc", &[]).unwrap(), Flavor::Generic, vec![0.0]).unwrap();
    assert!(matches!(g.apply(&id(), 0.0), Err(SteinError::Capability(_))));
}

#[test]
fn descriptor_round_trip() {
    let o = op("binomial_p", &[5.0], Flavor::Discrete, 0.4);
    let d = o.descriptor();
    let json = serde_json::to_string(&d).unwrap();
    let back: OperatorDescriptor = serde_json::from_str(&json).unwrap();
    let o2 = SteinOperator::from_descriptor(&back).unwrap();
    assert_eq!(o2.descriptor(), d);
    assert_eq!(o2.apply(&id(), 2.0).unwrap(), o.apply(&id(), 2.0).unwrap());
}

proptest! {
    #[test]
    fn operators_are_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, x in -3.0f64..3.0, k in 0usize..4) {
        let bat = polynomial_battery(3, Damping::Gaussian);
        let h = TestFunction::combine(a, &bat[k], b, &bat[(k + 1) % 4]);
        for o in [
            op("gaussian_loc", &[], Flavor::Location, 0.0),
            op("gaussian_scale", &[], Flavor::Scale, 1.0),
            op("student_nu", &[], Flavor::Named, 4.0),
        ] {
            let want = a * o.apply(&bat[k], x).unwrap() + b * o.apply(&bat[(k + 1) % 4], x).unwrap();
            prop_assert!((o.apply(&h, x).unwrap() - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
        let xi = (x.abs() * 2.0).floor();
        let p = op("poisson_lambda", &[], Flavor::Discrete, 1.0);
        let want = a * p.apply(&bat[k], xi).unwrap() + b * p.apply(&bat[(k + 1) % 4], xi).unwrap();
        prop_assert!((p.apply(&h, xi).unwrap() - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}
