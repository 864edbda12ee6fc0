//! Adaptive 15-point Gauss–Kronrod quadrature.
//!
//! Unbounded domains are mapped onto a subinterval of `(-1, 1)` by a
//! rational change of variables, then bisected adaptively (largest error
//! first) until the global error estimate meets the requested tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Interval, NumericError, NumericReport, Tolerances};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Knobs for [`integrate_with`].
#[derive(Debug, Clone)]
pub struct QuadratureOptions {
    pub tol: Tolerances,
    pub max_subintervals: usize,
    /// Points inside the domain where the integrand may jump or kink.
    pub breakpoints: Vec<f64>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { tol: Tolerances::DEFAULT, max_subintervals: 4000, breakpoints: Vec::new() }
    }
}

impl QuadratureOptions {
    pub fn with_tol(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// `[a, inf)`: x = a + (1 + t) / (1 - t)
    Upper(f64),
    /// `(-inf, b]`: x = b - (1 - t) / (1 + t)
    Lower(f64),
    /// `(-inf, inf)`: x = t / (1 - t^2)
    Both,
}

impl Map {
    fn for_domain(d: &Interval) -> (Map, f64, f64) {
        match (d.lo.is_finite(), d.hi.is_finite()) {
            (true, true) => (Map::Identity, d.lo, d.hi),
            (true, false) => (Map::Upper(d.lo), -1.0, 1.0),
            (false, true) => (Map::Lower(d.hi), -1.0, 1.0),
            (false, false) => (Map::Both, -1.0, 1.0),
        }
    }

    /// Returns `(x, dx/dt)`.
    #[inline]
    fn forward(self, t: f64) -> (f64, f64) {
        match self {
            Map::Identity => (t, 1.0),
            Map::Upper(a) => {
                let d = 1.0 - t;
                (a + (1.0 + t) / d, 2.0 / (d * d))
            }
            Map::Lower(b) => {
                let d = 1.0 + t;
                (b - (1.0 - t) / d, 2.0 / (d * d))
            }
            Map::Both => {
                let d = 1.0 - t * t;
                (t / d, (1.0 + t * t) / (d * d))
            }
        }
    }

    fn inverse(self, x: f64) -> f64 {
        match self {
            Map::Identity => x,
            Map::Upper(a) => {
                let s = x - a;
                (s - 1.0) / (s + 1.0)
            }
            Map::Lower(b) => {
                let s = b - x;
                (1.0 - s) / (1.0 + s)
            }
            Map::Both => 2.0 * x / (1.0 + (1.0 + 4.0 * x * x).sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

struct Evaluator<'f, F> {
    f: &'f F,
    map: Map,
    evaluations: usize,
}

impl<F: Fn(f64) -> f64> Evaluator<'_, F> {
    #[inline]
    fn at(&mut self, t: f64) -> Result<f64, NumericError> {
        self.evaluations += 1;
        let (x, jac) = self.map.forward(t);
        let y = (self.f)(x);
        if y.is_nan() {
            return Err(NumericError::Evaluation { at: x });
        }
        if y == 0.0 {
            // keeps 0 * inf jacobians at the far ends from turning into NaN
            return Ok(0.0);
        }
        Ok(y * jac)
    }

    fn kronrod(&mut self, a: f64, b: f64) -> Result<Segment, NumericError> {
        let centr = 0.5 * (a + b);
        let hlgth = 0.5 * (b - a);
        let fc = self.at(centr)?;
        let mut resg = fc * WG[3];
        let mut resk = fc * WGK[7];
        let mut resabs = resk.abs();
        let mut fv1 = [0.0; 7];
        let mut fv2 = [0.0; 7];
        for j in 0..7 {
            let dx = hlgth * XGK[j];
            let f1 = self.at(centr - dx)?;
            let f2 = self.at(centr + dx)?;
            fv1[j] = f1;
            fv2[j] = f2;
            resk += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * (f1 + f2);
            }
        }
        let reskh = resk * 0.5;
        let mut resasc = WGK[7] * (fc - reskh).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
        }
        let value = resk * hlgth;
        resabs *= hlgth.abs();
        resasc *= hlgth.abs();
        let mut error = ((resk - resg) * hlgth).abs();
        if resasc != 0.0 && error != 0.0 {
            error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            error = error.max(50.0 * f64::EPSILON * resabs);
        }
        if !value.is_finite() || !error.is_finite() {
            return Err(NumericError::Divergence {
                partial: NumericReport { value, abs_error_estimate: f64::INFINITY, evaluations: self.evaluations },
                reason: format!("non-finite integrand values on [{}, {}]", self.map.forward(a).0, self.map.forward(b).0),
            });
        }
        Ok(Segment { a, b, value, error })
    }
}

/// Integrates `f` over `domain` with default subdivision budget.
///
/// The returned error estimate satisfies
/// `abs_error_estimate <= max(abs_tol, rel_tol * |value|)` on success.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    domain: Interval,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<NumericReport, NumericError> {
    let tol = Tolerances::new(abs_tol, rel_tol)?;
    integrate_with(f, domain, &QuadratureOptions::with_tol(tol))
}

pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    domain: Interval,
    opts: &QuadratureOptions,
) -> Result<NumericReport, NumericError> {
    Tolerances::new(opts.tol.abs, opts.tol.rel)?;
    if domain.lo == domain.hi {
        return Ok(NumericReport { value: 0.0, abs_error_estimate: 0.0, evaluations: 1 });
    }
    let (map, t_lo, t_hi) = Map::for_domain(&domain);

    let mut cuts: Vec<f64> = vec![t_lo, t_hi];
    for &x in &opts.breakpoints {
        if domain.contains_interior(x) && x.is_finite() {
            let t = map.inverse(x);
            if t > t_lo && t < t_hi {
                cuts.push(t);
            }
        }
    }
    if !matches!(map, Map::Identity) {
        // unbounded pieces start from a uniform split of the mapped interval
        cuts.extend((1..8).map(|k| t_lo + (t_hi - t_lo) * k as f64 / 8.0));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut ev = Evaluator { f: &f, map, evaluations: 0 };
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    for w in cuts.windows(2) {
        heap.push(ev.kronrod(w[0], w[1])?);
    }

    let totals = |heap: &BinaryHeap<Segment>, frozen: &[Segment]| {
        let mut v = 0.0;
        let mut c = 0.0;
        let mut e = 0.0;
        for s in heap.iter().chain(frozen.iter()) {
            let t = v + s.value;
            c += if v.abs() >= s.value.abs() { (v - t) + s.value } else { (s.value - t) + v };
            v = t;
            e += s.error;
        }
        (v + c, e)
    };

    let (mut value, mut error) = totals(&heap, &frozen);
    let mut iterations = 0usize;
    loop {
        let target = opts.tol.abs.max(opts.tol.rel * value.abs());
        if error <= target {
            return Ok(NumericReport { value, abs_error_estimate: error, evaluations: ev.evaluations });
        }
        if heap.len() + frozen.len() >= opts.max_subintervals {
            return Err(NumericError::Divergence {
                partial: NumericReport { value, abs_error_estimate: error, evaluations: ev.evaluations },
                reason: format!("subdivision budget of {} intervals exhausted", opts.max_subintervals),
            });
        }
        let Some(worst) = heap.pop() else {
            return Err(NumericError::Divergence {
                partial: NumericReport { value, abs_error_estimate: error, evaluations: ev.evaluations },
                reason: "error estimate stalled at the resolution limit".into(),
            });
        };
        let mid = 0.5 * (worst.a + worst.b);
        let resolution = 100.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE);
        if worst.b - worst.a <= resolution || mid <= worst.a || mid >= worst.b {
            frozen.push(worst);
            continue;
        }
        let left = ev.kronrod(worst.a, mid)?;
        let right = ev.kronrod(mid, worst.b)?;
        heap.push(left);
        heap.push(right);
        iterations += 1;
        if iterations % 64 == 0 {
            (value, error) = totals(&heap, &frozen);
        } else {
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
        }
        if error <= opts.tol.abs.max(opts.tol.rel * value.abs()) {
            (value, error) = totals(&heap, &frozen);
        }
    }
}
