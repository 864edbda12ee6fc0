use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinError};
use crate::families::{as_int, Kind, ParametricFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    Csv,
    Jsonl,
}

impl SampleFormat {
    /// Guesses from the file extension; anything but `.jsonl`/`.ndjson` is csv.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => SampleFormat::Jsonl,
            _ => SampleFormat::Csv,
        }
    }
}

impl std::str::FromStr for SampleFormat {
    type Err = SteinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(SampleFormat::Csv),
            "jsonl" => Ok(SampleFormat::Jsonl),
            other => Err(SteinError::Input(format!("unknown sample format {other:?}; expected csv or jsonl"))),
        }
    }
}

/// Observations, row-major with `dim` coordinates per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub dim: usize,
    pub source: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        let s = Self { values, dim: 1, source: source.into() };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(SteinError::Input(format!("{}: no samples", self.source)));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(SteinError::Input(format!("{}: record {} is not finite", self.source, i / self.dim + 1)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.dim
    }

    /// The scalar observations; multi-coordinate samples are rejected.
    pub fn scalars(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(SteinError::Incompatible(format!("expected scalar samples, got {} coordinates", self.dim)));
        }
        Ok(&self.values)
    }

    /// Discrete families need integer samples.
    pub fn check_for(&self, family: &ParametricFamily) -> Result<()> {
        if family.kind() == Kind::Discrete {
            if let Some(i) = self.values.iter().position(|&v| as_int(v).is_none()) {
                return Err(SteinError::Input(format!(
                    "{}: record {} = {} is not an integer",
                    self.source,
                    i / self.dim + 1,
                    self.values[i]
                )));
            }
        }
        Ok(())
    }
}

fn parse_number(raw: &str) -> Option<f64> {
    raw.trim().replace('\u{2212}', "-").parse::<f64>().ok()
}

pub fn load_samples(path: &Path, format: SampleFormat) -> Result<SampleSet> {
    let text = std::fs::read_to_string(path).map_err(|e| SteinError::Input(format!("{}: {e}", path.display())))?;
    parse_samples(&text, format, &path.display().to_string())
}

/// Parses csv (one record per line, `k` comma-separated coordinates, an
/// optional non-numeric header) or jsonl (a number, an array, or an object
/// with an `x` field per line).
pub fn parse_samples(text: &str, format: SampleFormat, source: &str) -> Result<SampleSet> {
    let mut rows: Vec<(usize, Vec<f64>)> = vec![];
    match format {
        SampleFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| SteinError::Input(format!("{source}: {e}")))?;
                let line = rec.position().map_or(i + 1, |p| p.line() as usize);
                if rec.iter().all(|f| f.is_empty()) {
                    continue;
                }
                let parsed: Option<Vec<f64>> = rec.iter().map(parse_number).collect();
                match parsed {
                    Some(v) => rows.push((line, v)),
                    None if rows.is_empty() && i == 0 && rec.iter().all(|f| parse_number(f).is_none()) => {}
                    None => {
                        return Err(SteinError::Input(format!("{source}: line {line}: cannot parse {:?}", rec.as_slice())))
                    }
                }
            }
        }
        SampleFormat::Jsonl => {
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let bad = |why: String| SteinError::Input(format!("{source}: line {}: {why}", i + 1));
                let v: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
                let v = match v {
                    serde_json::Value::Object(mut m) => m.remove("x").ok_or_else(|| bad("object has no \"x\" field".into()))?,
                    other => other,
                };
                let coords = match v {
                    serde_json::Value::Number(n) => vec![n.as_f64().ok_or_else(|| bad("number out of range".into()))?],
                    serde_json::Value::Array(a) => a
                        .iter()
                        .map(|e| e.as_f64().ok_or_else(|| bad(format!("{e} is not a number"))))
                        .collect::<Result<_>>()?,
                    other => return Err(bad(format!("{other} is not a number or array"))),
                };
                rows.push((i + 1, coords));
            }
        }
    }
    let dim = rows.first().map_or(1, |r| r.1.len());
    let mut values = Vec::with_capacity(rows.len() * dim);
    for (line, r) in rows {
        if r.len() != dim || dim == 0 {
            return Err(SteinError::Input(format!("{source}: line {line}: expected {dim} coordinates, got {}", r.len())));
        }
        values.extend(r);
    }
    let s = SampleSet { values, dim, source: source.to_string() };
    s.validate()?;
    Ok(s)
}
