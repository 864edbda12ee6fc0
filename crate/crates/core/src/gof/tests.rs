use std::io::Write;

use super::*;
use crate::families::builtin;
use crate::operators::Flavor;
use crate::test_functions::{polynomial_battery, Damping};

fn gauss_op() -> SteinOperator {
    SteinOperator::new(builtin("gaussian_loc", &[]).unwrap(), Flavor::Location, vec![0.0]).unwrap()
}

fn damped() -> Vec<TestFunction> {
    polynomial_battery(3, Damping::Gaussian)
}

#[test]
fn loads_csv_and_jsonl() {
    let s = parse_samples("0.1\n\u{2212}0.2\n", SampleFormat::Csv, "mem").unwrap();
    assert_eq!(s.n(), 2);
    assert_eq!(s.values, vec![0.1, -0.2]);
    let s = parse_samples("x\n1.5\n2.5\n", SampleFormat::Csv, "mem").unwrap();
    assert_eq!(s.values, vec![1.5, 2.5]);
    let s = parse_samples("1,2\n3,4\n", SampleFormat::Csv, "mem").unwrap();
    assert_eq!((s.n(), s.dim), (2, 2));
    assert!(s.scalars().is_err());
    let s = parse_samples("{\"x\": 3}\n{\"x\": 0}\n\n7\n", SampleFormat::Jsonl, "mem").unwrap();
    assert_eq!(s.values, vec![3.0, 0.0, 7.0]);
    s.check_for(&builtin("poisson_lambda", &[]).unwrap()).unwrap();
    let frac = parse_samples("0.5\n", SampleFormat::Csv, "mem").unwrap();
    assert!(frac.check_for(&builtin("poisson_lambda", &[]).unwrap()).is_err());
}

#[test]
fn loader_errors_carry_locations() {
    assert!(parse_samples("", SampleFormat::Csv, "mem").is_err());
    let e = parse_samples("1.0\n2.0\nabc\n", SampleFormat::Csv, "mem").unwrap_err().to_string();
    assert!(e.contains("line 3"), "{e}");
    let e = parse_samples("1\n{\"y\": 2}\n", SampleFormat::Jsonl, "mem").unwrap_err().to_string();
    assert!(e.contains("line 2"), "{e}");
    let e = parse_samples("1\n2,3\n", SampleFormat::Csv, "mem").unwrap_err().to_string();
    assert!(e.contains("line 2"), "{e}");
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "0.25").unwrap();
    let s = load_samples(file.path(), SampleFormat::from_path(file.path())).unwrap();
    assert_eq!(s.values, vec![0.25]);
    assert!(load_samples(std::path::Path::new("/nonexistent/samples.csv"), SampleFormat::Csv).is_err());
}

#[test]
fn constructed_zero_sample() {
    let r3 = 3f64.sqrt();
    let xs = [-r3, 0.0, 0.0, 0.0, 0.0, r3];
    let s = stein_statistic(&xs, &gauss_op(), &polynomial_battery(2, Damping::None)).unwrap();
    assert!(s.value <= 1e-8, "{}", s.value);
}

#[test]
fn degenerate_battery_is_an_error() {
    let zero = vec![TestFunction::zero()];
    assert_eq!(stein_statistic(&[0.1, 0.2], &gauss_op(), &zero).unwrap_err(), SteinError::DegenerateBattery);
    // zero deviation with a nonzero mean is infinitely significant
    let one = vec![TestFunction::new("1", |_| 1.0).with_derivative(|_| 0.0)];
    assert_eq!(stein_statistic(&[0.5], &gauss_op(), &one).unwrap().value, f64::INFINITY);
}

#[test]
fn statistic_invariances() {
    let xs = draw(&builtin("exponential_scale", &[]).unwrap(), &[1.0], 500, 7).unwrap();
    let op = gauss_op();
    let b = damped();
    let base = stein_statistic(&xs, &op, &b).unwrap().value;
    let mut reordered = b.clone();
    reordered.reverse();
    reordered.push(b[1].clone());
    assert_eq!(stein_statistic(&xs, &op, &reordered).unwrap().value, base);
    let rescaled: Vec<_> = b.iter().map(|f| f.scaled(3.7)).collect();
    let v = stein_statistic(&xs, &op, &rescaled).unwrap().value;
    assert!((v - base).abs() <= 1e-12 * base, "{v} vs {base}");
}

#[test]
fn quantile_edge_cases() {
    let op = gauss_op();
    let c = calibrate_threshold(&op, &damped(), 50, 1, 0.5, 3).unwrap();
    assert_eq!(c.threshold, c.simulated[0]);
    // small alpha: the threshold is the largest simulated value
    let c = calibrate_threshold(&op, &damped(), 50, 40, 1e-9, 3).unwrap();
    assert!(c.simulated.iter().all(|&s| s <= c.threshold));
    // alpha near one: the smallest
    let c = calibrate_threshold(&op, &damped(), 50, 40, 1.0 - 1e-9, 3).unwrap();
    assert!(c.simulated.iter().all(|&s| s >= c.threshold));
    assert!(calibrate_threshold(&op, &damped(), 50, 40, 1.0, 3).is_err());
    assert!(calibrate_threshold(&op, &damped(), 0, 40, 0.1, 3).is_err());
}

#[test]
fn calibration_is_reproducible() {
    let op = gauss_op();
    let a = calibrate_threshold(&op, &damped(), 200, 30, 0.05, 11).unwrap();
    let b = calibrate_threshold(&op, &damped(), 200, 30, 0.05, 11).unwrap();
    assert_eq!(a, b);
    let c = calibrate_threshold(&op, &damped(), 200, 30, 0.05, 12).unwrap();
    assert_ne!(a.simulated, c.simulated);
}

#[test]
fn statistic_shrinks_with_n_under_the_target() {
    let fam = builtin("gaussian_loc", &[]).unwrap();
    let op = gauss_op();
    let b = damped();
    let avg = |n: usize| -> f64 {
        (0..20u64).map(|s| stein_statistic(&draw(&fam, &[0.0], n, 100 + s).unwrap(), &op, &b).unwrap().value).sum::<f64>() / 20.0
    };
    let (a, m, z) = (avg(100), avg(1000), avg(10_000));
    assert!(a > m && m > z, "{a} {m} {z}");
}

#[test]
fn single_observation_gives_a_valid_result() {
    let s = SampleSet::new(vec![0.3], "one").unwrap();
    let r = gof_test(&s, &gauss_op(), &damped(), 0.05, 42, 20).unwrap();
    assert_eq!(r.n, 1);
    assert!(r.statistic <= r.threshold || r.decision == Decision::Reject);
}

/// Frozen regression values: threshold for gaussian_loc at n = 10000,
/// n_sim = 200, alpha = 0.05, seed 42, and the statistic of the stream-0
/// target draw under that seed (a 5% tail draw, so it is rejected).
const FROZEN_THRESHOLD: f64 = 0.024_064_065_810_027_947;
const FROZEN_TARGET_STAT: f64 = 0.025_661_401_445_813_463;

#[test]
fn calibrated_regression_values() {
    let op = gauss_op();
    let b = damped();
    let cal = calibrate_threshold(&op, &b, 10_000, 200, 0.05, 42).unwrap();
    assert!((cal.threshold - FROZEN_THRESHOLD).abs() <= 1e-9 * FROZEN_THRESHOLD, "{:.17e}", cal.threshold);
    let target = draw(&builtin("gaussian_loc", &[]).unwrap(), &[0.0], 10_000, 42).unwrap();
    let r = gof_with_threshold(&target, &op, &b, &cal).unwrap();
    assert!((r.statistic - FROZEN_TARGET_STAT).abs() <= 1e-9 * FROZEN_TARGET_STAT, "{:.17e}", r.statistic);
    let exp = draw(&builtin("exponential_scale", &[]).unwrap(), &[1.0], 10_000, 42).unwrap();
    let r = gof_with_threshold(&exp, &op, &b, &cal).unwrap();
    assert_eq!(r.decision, Decision::Reject);
    assert!(r.statistic > 10.0 * cal.threshold);
    // other target draws pass at about the nominal rate
    let fam = builtin("gaussian_loc", &[]).unwrap();
    let accepted = (0..50u64)
        .filter(|&s| {
            let xs = draw(&fam, &[0.0], 10_000, 1000 + s).unwrap();
            gof_with_threshold(&xs, &op, &b, &cal).unwrap().decision == Decision::Accept
        })
        .count();
    assert!(accepted >= 45, "{accepted}/50");
}
