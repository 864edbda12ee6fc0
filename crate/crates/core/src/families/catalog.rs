use std::collections::BTreeMap;
use std::sync::{LazyLock, RwLock};

use serde::Serialize;

use super::custom::normalization_defect;
use super::{Kind, ParametricFamily, Structure};
use crate::error::{Result, SteinError};

pub const BUILTIN_NAMES: [&str; 13] = [
    "gaussian_loc",
    "gaussian_scale",
    "exponential_loc",
    "exponential_scale",
    "uniform_a",
    "uniform_loc",
    "semicircle_loc",
    "student_nu",
    "poisson_lambda",
    "geometric_p",
    "binomial_p",
    "multinomial_p1_slice",
    "gaussian_multiv_coord",
];

const PARAM_DOCS: [(&str, &str, &str); 13] = [
    ("gaussian_loc", "mu", "[sigma=1]"),
    ("gaussian_scale", "sigma (density sigma*phi(sigma*x))", "[]"),
    ("exponential_loc", "mu (support [mu, inf))", "[lambda=1]"),
    ("exponential_scale", "sigma (rate)", "[]"),
    ("uniform_a", "a (lower endpoint)", "[b=1]"),
    ("uniform_loc", "mu (support [a+mu, b+mu])", "[a=0, b=1]"),
    ("semicircle_loc", "mu", "[sigma=2]"),
    ("student_nu", "nu > 2 (degrees of freedom)", "[]"),
    ("poisson_lambda", "lambda", "[]"),
    ("geometric_p", "p (mass p(1-p)^x)", "[]"),
    ("binomial_p", "p", "[n=10]"),
    ("multinomial_p1_slice", "p1 in (0, 1 - sum p_j)", "[n=10, p2=0.2, x2=3, ...]"),
    ("gaussian_multiv_coord", "mu_j", "[k=2, j=0, covariance row-major, x_other]"),
];

static REGISTRY: LazyLock<RwLock<BTreeMap<String, ParametricFamily>>> = LazyLock::new(|| RwLock::new(BTreeMap::new()));

#[derive(Debug, Clone, Serialize)]
pub struct FamilyInfo {
    pub name: String,
    pub kind: Kind,
    pub structure: Structure,
    pub parameter: String,
    pub params: String,
    pub default_theta0: Vec<f64>,
    pub builtin: bool,
}

/// A builtin family by name; empty `params` selects the defaults.
pub fn builtin(name: &str, params: &[f64]) -> Result<ParametricFamily> {
    ParametricFamily::from_builtin(name, params)
}

/// Builtin families first, then registered custom ones.
pub fn lookup(name: &str, params: &[f64]) -> Result<ParametricFamily> {
    if BUILTIN_NAMES.contains(&name) {
        return builtin(name, params);
    }
    let reg = REGISTRY.read().unwrap_or_else(|e| e.into_inner());
    match reg.get(name) {
        Some(f) if params.is_empty() => Ok(f.clone()),
        Some(_) => Err(SteinError::param(name, "custom families take no positional parameters")),
        None => Err(SteinError::UnknownFamily(name.to_string())),
    }
}

/// Registers a custom family after checking normalization on a 5-point
/// grid around its default θ0. Re-registering a name replaces it.
pub fn register(family: ParametricFamily) -> Result<()> {
    if BUILTIN_NAMES.contains(&family.name()) {
        return Err(SteinError::param(family.name(), "name clashes with a builtin family"));
    }
    let theta0 = family.default_theta0().to_vec();
    let hood = family.neighborhood(&theta0, None);
    for (j, iv) in hood.iter().enumerate() {
        for i in 0..5 {
            let mut t = theta0.clone();
            t[j] = iv.lo + (iv.hi - iv.lo) * i as f64 / 4.0;
            let defect = normalization_defect(&family, &t)?;
            if defect > 1e-8 {
                return Err(SteinError::param(
                    family.name(),
                    format!("density is not normalized at theta = {t:?} (defect {defect:e})"),
                ));
            }
        }
    }
    let mut reg = REGISTRY.write().unwrap_or_else(|e| e.into_inner());
    reg.insert(family.name().to_string(), family);
    Ok(())
}

pub fn list_families() -> Vec<FamilyInfo> {
    let mut out: Vec<FamilyInfo> = PARAM_DOCS
        .iter()
        .map(|(name, parameter, params)| {
            let fam = builtin(name, &[]).expect("builtin defaults are valid");
            FamilyInfo {
                name: name.to_string(),
                kind: fam.kind(),
                structure: fam.structure(),
                parameter: parameter.to_string(),
                params: params.to_string(),
                default_theta0: fam.default_theta0().to_vec(),
                builtin: true,
            }
        })
        .collect();
    let reg = REGISTRY.read().unwrap_or_else(|e| e.into_inner());
    out.extend(reg.values().map(|f| FamilyInfo {
        name: f.name().to_string(),
        kind: f.kind(),
        structure: f.structure(),
        parameter: "theta".to_string(),
        params: "[]".to_string(),
        default_theta0: f.default_theta0().to_vec(),
        builtin: false,
    }));
    out
}
