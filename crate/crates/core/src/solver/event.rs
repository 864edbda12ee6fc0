use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinError};
use crate::families::{as_int, Kind, ParametricFamily, Support};
use crate::numerics::{IntRange, Interval};

/// Event `A` for the Stein equation with right-hand side `I_A − P(A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSet {
    /// `(−∞, at]`
    HalfLineLe { at: f64 },
    /// `(lo, hi]`; a missing end is infinite
    Interval { lo: Option<f64>, hi: Option<f64> },
    FiniteIntSet { points: Vec<i64> },
}

impl EventSet {
    pub fn half_line(at: f64) -> Self {
        EventSet::HalfLineLe { at }
    }

    pub fn points(points: impl IntoIterator<Item = i64>) -> Self {
        let mut p: Vec<i64> = points.into_iter().collect();
        p.sort_unstable();
        p.dedup();
        EventSet::FiniteIntSet { points: p }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            EventSet::HalfLineLe { at } => x <= *at,
            EventSet::Interval { lo, hi } => lo.is_none_or(|l| x > l) && hi.is_none_or(|h| x <= h),
            EventSet::FiniteIntSet { points } => as_int(x).is_some_and(|k| points.binary_search(&k).is_ok()),
        }
    }

    /// Finite boundary points, used as quadrature breakpoints.
    pub fn boundaries(&self) -> Vec<f64> {
        match self {
            EventSet::HalfLineLe { at } => vec![*at],
            EventSet::Interval { lo, hi } => lo.iter().chain(hi.iter()).copied().collect(),
            EventSet::FiniteIntSet { points } => points.iter().map(|&p| p as f64).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SteinError::Input(m));
        match self {
            EventSet::HalfLineLe { at } if at.is_nan() => bad("half-line endpoint is NaN".into()),
            EventSet::Interval { lo: Some(l), hi: Some(h) } if !(l < h) => bad(format!("interval ({l}, {h}] is empty")),
            EventSet::Interval { lo, hi } if lo.is_some_and(f64::is_nan) || hi.is_some_and(f64::is_nan) => {
                bad("interval endpoint is NaN".into())
            }
            _ => Ok(()),
        }
    }

    /// `P_θ(A ∩ [lo, hi])` under `family`, with the window closed on both
    /// ends (for discrete families, integer window).
    pub fn mass_in_window(&self, family: &ParametricFamily, theta: &[f64], lo: f64, hi: f64) -> Result<f64> {
        if lo > hi {
            return Ok(0.0);
        }
        match family.kind() {
            Kind::Continuous => {
                let (a, b) = match self {
                    EventSet::HalfLineLe { at } => (f64::NEG_INFINITY, *at),
                    EventSet::Interval { lo, hi } => (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)),
                    EventSet::FiniteIntSet { .. } => return Ok(0.0),
                };
                let (l, h) = (a.max(lo), b.min(hi));
                if l >= h {
                    return Ok(0.0);
                }
                Ok(family.prob(&Support::Continuous(Interval { lo: l, hi: h }), theta)?.value)
            }
            Kind::Discrete => {
                let clamp = |v: f64| v.clamp(-4.0e15, 4.0e15);
                let (wl, wh) = (clamp(lo).ceil() as i64, clamp(hi).floor() as i64);
                let hi_open = hi == f64::INFINITY;
                let (sl, sh) = match family.support(theta) {
                    Support::Discrete(r) => (r.lo, r.hi),
                    Support::Continuous(_) => unreachable!("discrete family"),
                };
                let window = |a: i64, b: Option<i64>| -> Result<f64> {
                    let l = a.max(wl).max(sl);
                    let b = match (b, sh) {
                        (Some(b), Some(s)) => Some(b.min(s)),
                        (b, s) => b.or(s),
                    };
                    let h = match (b, hi_open) {
                        (Some(b), true) => Some(b),
                        (Some(b), false) => Some(b.min(wh)),
                        (None, true) => None,
                        (None, false) => Some(wh),
                    };
                    if h.is_some_and(|h| h < l) {
                        return Ok(0.0);
                    }
                    Ok(family.prob(&Support::Discrete(IntRange { lo: l, hi: h }), theta)?.value)
                };
                match self {
                    EventSet::HalfLineLe { at } => window(i64::MIN / 4, Some(clamp(*at).floor() as i64)),
                    EventSet::Interval { lo, hi } => window(
                        lo.map_or(i64::MIN / 4, |l| clamp(l).floor() as i64 + 1),
                        hi.map(|h| clamp(h).floor() as i64),
                    ),
                    EventSet::FiniteIntSet { points } => Ok(points
                        .iter()
                        .filter(|&&p| p >= wl && (hi_open || p <= wh))
                        .map(|&p| family.density(p as f64, theta))
                        .sum()),
                }
            }
        }
    }

    /// `P_θ(A)`.
    pub fn mass(&self, family: &ParametricFamily, theta: &[f64]) -> Result<f64> {
        self.mass_in_window(family, theta, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `P_θ(A ∩ S)` for a support region `S`.
    pub fn mass_within(&self, family: &ParametricFamily, theta: &[f64], region: &Support) -> Result<f64> {
        let h = region.hull();
        self.mass_in_window(family, theta, h.lo, h.hi)
    }
}

impl fmt::Display for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventSet::HalfLineLe { at } => write!(f, "(-inf, {at}]"),
            EventSet::Interval { lo, hi } => {
                let l = lo.map_or("-inf".to_string(), |v| v.to_string());
                let h = hi.map_or("inf".to_string(), |v| v.to_string());
                write!(f, "({l}, {h}]")
            }
            EventSet::FiniteIntSet { points } => {
                let p: Vec<String> = points.iter().map(|v| v.to_string()).collect();
                write!(f, "{{{}}}", p.join(", "))
            }
        }
    }
}

/// `le:0.0`, `int:{0,1}`, `interval:a,b` (`inf` or an empty side for
/// infinite ends).
impl FromStr for EventSet {
    type Err = SteinError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SteinError::Input(format!("cannot parse event set {s:?}; expected le:X, int:{{a,b}} or interval:a,b"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let num = |t: &str| -> Result<Option<f64>> {
            let t = t.trim();
            match t {
                "" | "inf" | "-inf" | "+inf" => Ok(None),
                _ => t.replace('\u{2212}', "-").parse::<f64>().map(Some).map_err(|_| bad()),
            }
        };
        let set = match kind.trim() {
            "le" => EventSet::HalfLineLe { at: num(rest)?.ok_or_else(bad)? },
            "int" => {
                let inner = rest.trim().trim_start_matches('{').trim_end_matches('}');
                let pts = inner
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| t.trim().parse::<i64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                if pts.is_empty() {
                    return Err(bad());
                }
                EventSet::points(pts)
            }
            "interval" => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                EventSet::Interval { lo: num(a)?, hi: num(b)? }
            }
            _ => return Err(bad()),
        };
        set.validate()?;
        Ok(set)
    }
}
