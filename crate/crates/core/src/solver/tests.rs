use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::*;
use crate::families::builtin;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn parse_event_sets() {
    assert_eq!("le:0.0".parse::<EventSet>().unwrap(), EventSet::half_line(0.0));
    assert_eq!("int:{1, 0}".parse::<EventSet>().unwrap(), EventSet::points([0, 1]));
    assert_eq!(
        "interval:-1,inf".parse::<EventSet>().unwrap(),
        EventSet::Interval { lo: Some(-1.0), hi: None }
    );
    assert!("interval:2,1".parse::<EventSet>().is_err());
    assert!("ge:3".parse::<EventSet>().is_err());
    let json = serde_json::to_string(&EventSet::half_line(0.5)).unwrap();
    assert_eq!(json, r#"{"kind":"half_line_le","at":0.5}"#);
    let i: EventSet = serde_json::from_str(r#"{"kind":"interval","lo":null,"hi":2.0}"#).unwrap();
    assert!(i.contains(-100.0) && i.contains(2.0) && !i.contains(2.5));
}

#[test]
fn gaussian_half_line_solution() {
    let g = builtin("gaussian_loc", &[]).unwrap();
    let sol = solve_continuous(&g, &[0.0], &EventSet::half_line(0.0)).unwrap();
    let n = Normal::standard();
    let oracle = n.cdf(0.0) / (2.0 * n.pdf(0.0));
    assert!((sol.eval(0.0).unwrap() - oracle).abs() < 1e-6);
    assert!((sol.eval(0.0).unwrap() - 0.626_657_1).abs() < 1e-6);
    assert!((sol.target_mass() - 0.5).abs() < 1e-10);
    assert_eq!(sol.residual_grid().len(), 200);
    assert!(sol.max_residual() <= 1e-6, "{}", sol.max_residual());
}

#[test]
fn full_support_gives_zero() {
    let g = builtin("gaussian_loc", &[]).unwrap();
    let all = EventSet::Interval { lo: None, hi: None };
    let sol = solve_continuous(&g, &[0.0], &all).unwrap();
    for x in [-3.0, -0.2, 0.0, 1.7] {
        assert!(sol.eval(x).unwrap().abs() < 1e-12);
    }
    assert!(sol.max_residual() < 1e-12);
    let p = builtin("poisson_lambda", &[]).unwrap();
    let sol = solve_discrete(&p, &[1.0], &EventSet::half_line(1e9)).unwrap();
    assert!((0..20).all(|k| sol.eval(k as f64).unwrap().abs() < 1e-15));
}

#[test]
fn exponential_scale_interval_solution() {
    let e = builtin("exponential_scale", &[]).unwrap();
    let set = EventSet::Interval { lo: Some(0.0), hi: Some(1.0) };
    let sol = solve_continuous(&e, &[1.0], &set).unwrap();
    let p = 1.0 - (-1.0f64).exp();
    let oracle = 1f64.exp() * simpson(|z| (1.0 - p) * (-z).exp(), 0.0, 1.0, 2000);
    assert!((sol.eval(1.0).unwrap() - oracle).abs() < 1e-9, "{} vs {oracle}", sol.eval(1.0).unwrap());
    assert!((oracle - 0.632_120_6).abs() < 1e-7);
    assert!(sol.max_residual() <= 1e-6);
}

#[test]
fn poisson_singleton_solution() {
    let p = builtin("poisson_lambda", &[]).unwrap();
    let sol = solve_discrete(&p, &[1.0], &EventSet::points([0])).unwrap();
    let em1 = (-1.0f64).exp();
    assert!((sol.eval(1.0).unwrap() - em1 * (1.0 - em1)).abs() < 1e-10);
    assert!((sol.eval(1.0).unwrap() - 0.232_544_2).abs() < 1e-7);
    assert_eq!(sol.eval(0.0).unwrap(), 0.0);
    let op = SteinOperator::new(p.clone(), Flavor::Discrete, vec![1.0]).unwrap();
    let grid: Vec<f64> = (0..=50).map(|k| k as f64).collect();
    assert!(sol.residual(&op, &grid).unwrap() <= 1e-10);
    assert!(sol.max_residual() <= 1e-10);
}

#[test]
fn geometric_singleton_solution() {
    let g = builtin("geometric_p", &[]).unwrap();
    let sol = solve_discrete(&g, &[0.5], &EventSet::points([0])).unwrap();
    let ratio = |x: f64, p: f64| g.density(x, &[p]) / g.density(0.0, &[p]);
    let h = 1e-6;
    let psi1 = (ratio(1.0, 0.5 + h) - ratio(1.0, 0.5 - h)) / (2.0 * h);
    let oracle = (1.0 - 0.5) * 0.5 / psi1;
    assert!((sol.eval(1.0).unwrap() - oracle).abs() < 1e-8, "{} vs {oracle}", sol.eval(1.0).unwrap());
    assert!(sol.max_residual() <= 1e-10);
}

#[test]
fn binomial_solution_reaches_the_upper_end() {
    let b = builtin("binomial_p", &[]).unwrap();
    let sol = solve_discrete(&b, &[0.3], &EventSet::half_line(2.0)).unwrap();
    assert!(sol.max_residual() <= 1e-10);
    assert_eq!(sol.residual_grid().last().unwrap().0, 10.0);
}

#[test]
fn location_representation_solves_the_location_operator() {
    let g = builtin("gaussian_loc", &[]).unwrap();
    let sol = solve_continuous(&g, &[0.0], &EventSet::half_line(0.5)).unwrap();
    let op = SteinOperator::new(g.clone(), Flavor::Location, vec![0.0]).unwrap();
    let grid = default_grid(&g, &[0.0]).unwrap();
    assert!(sol.residual(&op, &grid).unwrap() <= 1e-6);
    let scale = SteinOperator::new(builtin("gaussian_scale", &[]).unwrap(), Flavor::Scale, vec![1.0]).unwrap();
    assert!(sol.test_function_for(&scale).is_err());
}

#[test]
fn attached_derivative_matches_difference() {
    let e = builtin("exponential_loc", &[]).unwrap();
    let sol = solve_continuous(&e, &[0.0], &EventSet::half_line(0.7)).unwrap();
    let tf = sol.test_function();
    let grid: Vec<f64> = (1..40).map(|i| 0.1 * i as f64 + 0.013).collect();
    assert!(tf.derivative_defect(&grid).unwrap() < 1e-5);
}

#[test]
fn csv_export() {
    let p = builtin("poisson_lambda", &[]).unwrap();
    let sol = solve_discrete(&p, &[1.0], &EventSet::points([0])).unwrap();
    let csv = sol.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,f_A,residual");
    assert_eq!(lines.count(), 50);
}

#[test]
fn theorem_solution_vanishes_at_theta0() {
    let g = builtin("gaussian_loc", &[]).unwrap();
    let t = build_theorem_solution(&g, &[0.0], &[0.0], &EventSet::half_line(0.0)).unwrap();
    for x in [-2.0, 0.0, 0.3, 4.0] {
        assert_eq!(t.eval(x).unwrap(), 0.0);
    }
    let all = build_theorem_solution(&g, &[0.0], &[0.1], &EventSet::Interval { lo: None, hi: None }).unwrap();
    for x in [-2.0, 0.0, 0.3] {
        assert!(all.eval(x).unwrap().abs() < 1e-14);
    }
    assert!(build_theorem_solution(&g, &[0.0], &[0.5], &EventSet::half_line(0.0)).is_err());
}

#[test]
fn theorem_solution_matches_nested_quadrature() {
    let g = builtin("gaussian_loc", &[]).unwrap();
    let t = build_theorem_solution(&g, &[0.0], &[0.1], &EventSet::half_line(0.0)).unwrap();
    let n = Normal::standard();
    let oracle = simpson(|u| (1.0 - n.cdf(-u)) * n.pdf(-u), 0.0, 0.1, 400) / n.pdf(-0.1);
    let v = t.eval(0.0).unwrap();
    assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
}

#[test]
fn theorem_solution_parameter_derivative_is_l_a() {
    let g = builtin("gaussian_loc", &[]).unwrap();
    let set = EventSet::half_line(0.3);
    let t = build_theorem_solution(&g, &[0.0], &[0.1], &set).unwrap();
    let op = SteinOperator::new(g.clone(), Flavor::Generic, vec![0.0]).unwrap();
    let tf = t.test_function();
    let p = set.mass(&g, &[0.0]).unwrap();
    for i in 0..25 {
        let x = -3.0 + 0.25 * i as f64 + 0.01;
        let want = (set.contains(x) as u8 as f64) - p;
        let got = op.apply(&tf, x).unwrap();
        assert!((got - want).abs() < 1e-5, "x={x}: {got} vs {want}");
    }
}

#[test]
fn theorem_solution_conditions_on_moving_support() {
    let e = builtin("exponential_loc", &[]).unwrap();
    let t = build_theorem_solution(&e, &[0.0], &[0.1], &EventSet::half_line(1.0)).unwrap();
    // S_theta = [0.1, inf): points left of it are outside
    assert_eq!(t.eval(0.05).unwrap(), 0.0);
    assert!(t.eval(0.5).unwrap().is_finite());
}
