//! Sample-based Stein discrepancy and Monte Carlo calibration.
//!
//! The statistic is `max_f |mean(T f(X_i))| / sd(T f(X_i))` over a battery,
//! and its null distribution is simulated from the target.

mod samples;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinError};
use crate::families::ParametricFamily;
use crate::operators::SteinOperator;
use crate::test_functions::TestFunction;

pub use samples::{load_samples, parse_samples, SampleFormat, SampleSet};

/// Per-function part of the statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionStat {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    /// `|mean| / sd`; `None` when both vanish and the member is skipped
    pub standardized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub value: f64,
    pub per_function: Vec<FunctionStat>,
}

/// Evaluates the statistic. The operator's boundary functional under the
/// target is added to every `T f(X_i)`, so that the target mean is zero.
pub fn stein_statistic(samples: &[f64], op: &SteinOperator, battery: &[TestFunction]) -> Result<Statistic> {
    if samples.is_empty() {
        return Err(SteinError::Input("no samples".into()));
    }
    let target = |x: f64| op.family().density(x, op.theta0());
    let n = samples.len() as f64;
    let mut per_function = Vec::with_capacity(battery.len());
    for f in battery {
        let shift = op.boundary_functional(f, &target)?;
        let vals: Vec<f64> = samples.iter().map(|&x| Ok(op.interior_apply(f, x)? + shift)).collect::<Result<_>>()?;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(mean.is_finite() && sd.is_finite()) {
            return Err(SteinError::Input(format!("T f is not finite on the sample for {}", f.label())));
        }
        let standardized = match (sd > 0.0, mean != 0.0) {
            (true, _) => Some(mean.abs() / sd),
            (false, true) => Some(f64::INFINITY),
            (false, false) => None,
        };
        per_function.push(FunctionStat { label: f.label().to_string(), mean, sd, standardized });
    }
    let value = per_function.iter().filter_map(|s| s.standardized).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    match value {
        Some(value) => Ok(Statistic { value, per_function }),
        None => Err(SteinError::DegenerateBattery),
    }
}

/// Generator for replication `stream` under `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` draws from `g(·; θ)` on stream 0 of `seed`.
pub fn draw(family: &ParametricFamily, theta: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    draw_stream(family, theta, n, seed, 0)
}

fn draw_stream(family: &ParametricFamily, theta: &[f64], n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    if !family.has_sampler() {
        return Err(SteinError::Capability(format!("family {} has no sampler", family.name())));
    }
    let mut rng = rng_for(seed, stream);
    (0..n).map(|_| family.sample(&mut rng, theta)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub alpha: f64,
    pub n: usize,
    pub n_sim: usize,
    pub seed: u64,
    /// simulated statistics in replication order
    pub simulated: Vec<f64>,
}

/// The `(1 − α)` empirical quantile of the statistic over `n_sim`
/// replications of size `n` from the target. Replication `r` uses stream
/// `r + 1` of `seed`, so the result does not depend on scheduling.
pub fn calibrate_threshold(
    op: &SteinOperator,
    battery: &[TestFunction],
    n: usize,
    n_sim: usize,
    alpha: f64,
    seed: u64,
) -> Result<Calibration> {
    if n == 0 || n_sim == 0 {
        return Err(SteinError::Input("n and n_sim must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SteinError::Input(format!("alpha = {alpha} is not in (0, 1)")));
    }
    let simulated: Vec<f64> = (0..n_sim as u64)
        .into_par_iter()
        .map(|r| {
            let xs = draw_stream(op.family(), op.theta0(), n, seed, r + 1)?;
            match stein_statistic(&xs, op, battery) {
                Ok(s) => Ok(s.value),
                Err(SteinError::DegenerateBattery) => Ok(0.0),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut sorted = simulated.clone();
    sorted.sort_by(f64::total_cmp);
    let k = ((1.0 - alpha) * n_sim as f64).ceil() as usize;
    let threshold = sorted[k.clamp(1, n_sim) - 1];
    Ok(Calibration { threshold, alpha, n, n_sim, seed, simulated })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub family: String,
    pub theta0: Vec<f64>,
    pub operator: String,
    pub n: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub seed: u64,
    pub n_sim: usize,
    pub decision: Decision,
    pub per_function: Vec<FunctionStat>,
}

/// Tests `samples` against the operator's target, with a threshold
/// calibrated at the sample size.
pub fn gof_test(
    samples: &SampleSet,
    op: &SteinOperator,
    battery: &[TestFunction],
    alpha: f64,
    seed: u64,
    n_sim: usize,
) -> Result<GofResult> {
    let xs = samples.scalars()?;
    samples.check_for(op.family())?;
    let cal = calibrate_threshold(op, battery, xs.len(), n_sim, alpha, seed)?;
    gof_with_threshold(xs, op, battery, &cal)
}

/// As [`gof_test`] with a precomputed calibration (its `n` should match).
pub fn gof_with_threshold(xs: &[f64], op: &SteinOperator, battery: &[TestFunction], cal: &Calibration) -> Result<GofResult> {
    let stat = stein_statistic(xs, op, battery)?;
    let decision = if stat.value > cal.threshold { Decision::Reject } else { Decision::Accept };
    Ok(GofResult {
        family: op.family().label(),
        theta0: op.theta0().to_vec(),
        operator: op.label(),
        n: xs.len(),
        statistic: stat.value,
        threshold: cal.threshold,
        alpha: cal.alpha,
        seed: cal.seed,
        n_sim: cal.n_sim,
        decision,
        per_function: stat.per_function,
    })
}

#[cfg(test)]
mod tests;
