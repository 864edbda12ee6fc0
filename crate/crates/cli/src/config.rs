use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use steinforge::families::FamilyDescriptor;
use steinforge::gof::SampleFormat;
use steinforge::operators::Flavor;
use steinforge::solver::EventSet;
use steinforge::test_functions::{BatterySpec, Damping};

use crate::flags::Flags;
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Zero expectations under the target and discrimination of an alternative
    Verify,
    /// Solve the Stein equation for indicator right-hand sides
    Solve,
    /// Generalized score and factorization check between two families
    Score,
    /// Stein-discrepancy goodness-of-fit test on a sample file
    Gof,
    /// List builtin and registered families
    ListFamilies,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Solve => "solve",
            Command::Score => "score",
            Command::Gof => "gof",
            Command::ListFamilies => "list-families",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyRef {
    pub family: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltSpec {
    /// defaults to the target family
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Restriction {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// A run description; every field may also come from a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor: Option<Flavor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<BatterySpec>,
    #[serde(default, deserialize_with = "sets_from_json", skip_serializing_if = "Vec::is_empty")]
    pub sets: Vec<EventSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<AltSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<FamilyRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restriction: Option<Restriction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_format: Option<SampleFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub custom_families: Vec<FamilyDescriptor>,
}

/// Sets may be written as objects or in the flag syntax (`"le:0.0"`).
fn sets_from_json<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<EventSet>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Text(String),
        Set(EventSet),
    }
    let raw: Vec<Repr> = Vec::deserialize(d)?;
    raw.into_iter()
        .map(|r| match r {
            Repr::Text(s) => s.parse::<EventSet>().map_err(serde::de::Error::custom),
            Repr::Set(s) => Ok(s),
        })
        .collect()
}

pub fn parse_config_text(text: &str, source: &str) -> Result<RunConfig, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { String::new() } else { format!(" at `{path}`") };
        Failure::Usage(format!("{source}{at}: {}", e.into_inner()))
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_config_text(&text, &path.display().to_string())
}

fn split_family(spec: &str) -> Result<FamilyRef, Failure> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, parse_list(p, "family parameters")?),
        None => (spec, vec![]),
    };
    if name.trim().is_empty() {
        return Err(Failure::Usage(format!("missing family name in {spec:?}")));
    }
    Ok(FamilyRef { family: name.trim().to_string(), params })
}

fn parse_list(raw: &str, what: &str) -> Result<Vec<f64>, Failure> {
    raw.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("{what}: cannot parse {t:?}"))))
        .collect()
}

/// `FAMILY[:p1,p2]@THETA[,THETA]`, or `@THETA` for the target family.
pub fn parse_alt(spec: &str) -> Result<AltSpec, Failure> {
    let (fam, theta) =
        spec.rsplit_once('@').ok_or_else(|| Failure::Usage(format!("--alt {spec:?}: expected FAMILY[:params]@THETA")))?;
    let theta = parse_list(theta, "--alt theta")?;
    if theta.is_empty() {
        return Err(Failure::Usage(format!("--alt {spec:?}: missing theta")));
    }
    if fam.trim().is_empty() {
        return Ok(AltSpec { family: None, params: vec![], theta });
    }
    let r = split_family(fam)?;
    Ok(AltSpec { family: Some(r.family), params: r.params, theta })
}

/// `polynomial:DEGREE[:none|gaussian]` or `hermite:COUNT`.
pub fn parse_battery(spec: &str) -> Result<BatterySpec, Failure> {
    let bad = || Failure::Usage(format!("--battery {spec:?}: expected polynomial:DEGREE[:damping] or hermite:COUNT"));
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    match parts.as_slice() {
        ["polynomial", d] | ["polynomial", d, "none"] => {
            Ok(BatterySpec::Polynomial { max_degree: d.parse().map_err(|_| bad())?, damping: Damping::None })
        }
        ["polynomial", d, "gaussian"] => {
            Ok(BatterySpec::Polynomial { max_degree: d.parse().map_err(|_| bad())?, damping: Damping::Gaussian })
        }
        ["hermite", c] => Ok(BatterySpec::Hermite { count: c.parse().map_err(|_| bad())? }),
        _ => Err(bad()),
    }
}

impl RunConfig {
    /// Flags win over the file.
    pub fn apply_flags(mut self, f: &Flags) -> Result<Self, Failure> {
        if let Some(v) = &f.family {
            let r = split_family(v)?;
            self.family = Some(r.family);
            if !r.params.is_empty() {
                self.params = r.params;
            }
        }
        if let Some(v) = &f.params {
            self.params = v.clone();
        }
        if let Some(v) = &f.theta0 {
            self.theta0 = Some(v.clone());
        }
        if let Some(v) = &f.flavor {
            self.flavor = Some(v.parse().map_err(|e: steinforge::SteinError| Failure::Usage(e.to_string()))?);
        }
        if let Some(v) = &f.battery {
            self.battery = Some(parse_battery(v)?);
        }
        if !f.sets.is_empty() {
            self.sets = f
                .sets
                .iter()
                .map(|s| s.parse::<EventSet>().map_err(|e| Failure::Usage(format!("--set: {e}"))))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = &f.alt {
            self.alternative = Some(parse_alt(v)?);
        }
        if let Some(v) = &f.compare {
            self.compare = Some(split_family(v)?);
        }
        if let Some(v) = &f.restrict {
            let (lo, hi) = v
                .split_once(',')
                .ok_or_else(|| Failure::Usage(format!("--restrict {v:?}: expected LO,HI")))?;
            let end = |t: &str| -> Result<Option<f64>, Failure> {
                match t.trim() {
                    "" | "inf" | "-inf" => Ok(None),
                    s => s.parse().map(Some).map_err(|_| Failure::Usage(format!("--restrict: cannot parse {s:?}"))),
                }
            };
            self.restriction = Some(Restriction { lo: end(lo)?, hi: end(hi)? });
        }
        if let Some(v) = &f.samples {
            self.samples = Some(v.clone());
        }
        if let Some(v) = &f.samples_format {
            self.samples_format = Some(v.parse().map_err(|e: steinforge::SteinError| Failure::Usage(e.to_string()))?);
        }
        if f.alpha.is_some() {
            self.alpha = f.alpha;
        }
        if f.seed.is_some() {
            self.seed = f.seed;
        }
        if f.n_sim.is_some() {
            self.n_sim = f.n_sim;
        }
        if f.tol.is_some() {
            self.tolerance = f.tol;
        }
        if let Some(v) = &f.out {
            self.out = Some(v.clone());
        }
        self.deterministic |= f.deterministic;
        Ok(self)
    }

    pub fn validate(&self, command: Command) -> Result<(), Failure> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Failure::Usage(format!("{} needs {what}", command.name())))
            }
        };
        if let Some(t) = self.tolerance {
            need(t > 0.0 && t.is_finite(), "a positive tolerance")?;
        }
        if let Some(a) = self.alpha {
            need(a > 0.0 && a < 1.0, "alpha in (0, 1)")?;
        }
        match command {
            Command::ListFamilies => Ok(()),
            Command::Verify => need(self.family.is_some(), "a family"),
            Command::Solve => {
                need(self.family.is_some(), "a family")?;
                need(!self.sets.is_empty(), "at least one set (--set)")
            }
            Command::Score => {
                need(self.family.is_some(), "a family")?;
                need(self.compare.is_some(), "a second family (--compare)")
            }
            Command::Gof => {
                need(self.family.is_some(), "a family")?;
                need(self.samples.is_some(), "a sample file (--samples)")?;
                need(self.n_sim != Some(0), "n_sim >= 1")
            }
        }
    }
}
