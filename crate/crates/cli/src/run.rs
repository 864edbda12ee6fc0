use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use steinforge::characterize::{characterize, Law, Settings, Verdict};
use steinforge::families::{list_families, lookup, register, ParametricFamily, Structure, Support};
use steinforge::gof::{gof_test, load_samples, Decision, SampleFormat};
use steinforge::numerics::{Interval, Tolerances};
use steinforge::operators::{default_flavor, SteinOperator};
use steinforge::score_factor::{laplace_loc, location_form, scale_form, FactorizationReport, ScorePair};
use steinforge::solver::{solve, EventSet};
use steinforge::test_functions::TestFunction;

use crate::config::{Command, RunConfig};
use crate::Failure;

const RESIDUAL_TOL: f64 = 1e-6;
const FACTOR_TOL: f64 = 1e-6;
const SCORE_GRID_POINTS: usize = 100;

pub fn execute(command: Command, cfg: &RunConfig) -> Result<u8, Failure> {
    register_families(cfg)?;
    match command {
        Command::Verify => verify(cfg),
        Command::Solve => solve_sets(cfg),
        Command::Score => score(cfg),
        Command::Gof => gof(cfg),
        Command::ListFamilies => families(cfg),
    }
}

fn register_families(cfg: &RunConfig) -> Result<(), Failure> {
    if lookup("laplace_loc", &[]).is_err() {
        register(laplace_loc()?)?;
    }
    for d in &cfg.custom_families {
        register(d.build()?)?;
    }
    Ok(())
}

/// `--tol`, then the config, then `STEINFORGE_TOL`.
fn tolerance(cfg: &RunConfig) -> Result<Option<f64>, Failure> {
    if cfg.tolerance.is_some() {
        return Ok(cfg.tolerance);
    }
    if std::env::var_os("STEINFORGE_TOL").is_some() {
        let t = Tolerances::from_env().map_err(steinforge::SteinError::from)?;
        return Ok(Some(t.abs));
    }
    Ok(None)
}

fn target(cfg: &RunConfig) -> Result<(ParametricFamily, Vec<f64>), Failure> {
    let name = cfg.family.as_deref().ok_or_else(|| Failure::Usage("no family given".into()))?;
    let fam = lookup(name, &cfg.params)?;
    let theta0 = cfg.theta0.clone().unwrap_or_else(|| fam.default_theta0().to_vec());
    fam.validate_theta(&theta0)?;
    Ok((fam, theta0))
}

fn operator(cfg: &RunConfig) -> Result<SteinOperator, Failure> {
    let (fam, theta0) = target(cfg)?;
    let flavor = cfg.flavor.unwrap_or_else(|| default_flavor(&fam));
    Ok(SteinOperator::new(fam, flavor, theta0)?)
}

fn battery(cfg: &RunConfig) -> Result<Vec<TestFunction>, Failure> {
    Ok(cfg.battery.clone().unwrap_or_default().build()?)
}

fn envelope(command: Command, cfg: &RunConfig, result: Value) -> Value {
    let mut env = json!({
        "tool": "steinforge",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
    });
    if !cfg.deterministic {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        env["generated_unix"] = json!(secs);
    }
    env["config"] = serde_json::to_value(cfg).unwrap_or(Value::Null);
    env["result"] = result;
    env
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Writes to stdout, ignoring a closed pipe.
fn stdout(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let io = |e| Failure::Io { path: dir.join(name).display().to_string(), source: e };
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join(name), contents).map_err(io)
}

/// Pretty JSON to `<out>/<name>` or to stdout.
fn emit(cfg: &RunConfig, name: &str, doc: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).expect("json values serialize") + "\n";
    match &cfg.out {
        Some(dir) => {
            write_file(dir, name, &text)?;
            stdout(&format!("wrote {}\n", dir.join(name).display()));
            Ok(())
        }
        None => {
            stdout(&text);
            Ok(())
        }
    }
}

fn verify(cfg: &RunConfig) -> Result<u8, Failure> {
    let op = operator(cfg)?;
    let battery = battery(cfg)?;
    let alt = match &cfg.alternative {
        Some(a) => {
            let fam = match &a.family {
                Some(name) => lookup(name, &a.params)?,
                None if a.params.is_empty() => op.family().clone(),
                None => lookup(op.family().name(), &a.params)?,
            };
            Some(Law::new(fam, a.theta.clone())?)
        }
        None => None,
    };
    let mut sets = cfg.sets.clone();
    if sets.is_empty() && alt.is_some() {
        let median = op.family().quantile(0.5, op.theta0())?;
        sets.push(EventSet::half_line(median));
    }
    let mut settings = Settings::default();
    if let Some(t) = tolerance(cfg)? {
        settings.quadrature = Tolerances::new(t, t).map_err(steinforge::SteinError::from)?;
    }
    let report = characterize(&op, &battery, alt.as_ref(), &sets, &settings);
    if let Some(dir) = &cfg.out {
        write_file(dir, "report.md", &report.to_markdown())?;
    }
    emit(cfg, "report.json", &envelope(Command::Verify, cfg, to_value(&report)))?;
    Ok(match report.verdict {
        Verdict::Characterized => 0,
        Verdict::Violated => 1,
        Verdict::Inconclusive => 3,
    })
}

fn solve_sets(cfg: &RunConfig) -> Result<u8, Failure> {
    let (fam, theta0) = target(cfg)?;
    let tol = tolerance(cfg)?.unwrap_or(RESIDUAL_TOL);
    let mut entries = vec![];
    let mut worst = 0.0f64;
    for (i, set) in cfg.sets.iter().enumerate() {
        let sol = solve(&fam, &theta0, set)?;
        let residual = sol.max_residual();
        worst = worst.max(residual);
        let mut entry = json!({
            "set": set.to_string(),
            "target_mass": sol.target_mass(),
            "max_residual": residual,
        });
        match &cfg.out {
            Some(dir) => {
                let name = format!("solution_{i}.csv");
                write_file(dir, &name, &sol.to_csv()?)?;
                entry["csv"] = json!(name);
            }
            None => entry["rows"] = to_value(&sol.rows()?),
        }
        entries.push(entry);
    }
    let result = json!({
        "family": fam.label(),
        "theta0": theta0,
        "tolerance": tol,
        "max_residual": worst,
        "solutions": entries,
    });
    emit(cfg, "solve.json", &envelope(Command::Solve, cfg, result))?;
    if worst > tol {
        eprintln!("steinforge: residual {worst:.3e} exceeds tolerance {tol:.1e}");
        return Ok(3);
    }
    Ok(0)
}

fn linspace_interior(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

fn score_grid(cfg: &RunConfig, pair: &ScorePair) -> Result<Vec<f64>, Failure> {
    if let Some(g) = cfg.grid {
        if g.points == 0 || !(g.lo <= g.hi) {
            return Err(Failure::Usage("grid needs lo <= hi and at least one point".into()));
        }
        if g.points == 1 {
            return Ok(vec![g.lo]);
        }
        return Ok((0..g.points).map(|i| g.lo + (g.hi - g.lo) * i as f64 / (g.points - 1) as f64).collect());
    }
    let domain = pair.domain();
    let hull = domain.hull();
    if hull.lo.is_finite() && hull.hi.is_finite() && matches!(domain, Support::Continuous(_)) {
        return Ok(linspace_interior(hull.lo, hull.hi, SCORE_GRID_POINTS));
    }
    let mut grid = vec![];
    for u in linspace_interior(0.0, 1.0, SCORE_GRID_POINTS) {
        let x = pair.p().quantile(u, pair.theta0())?;
        if domain.contains(x) && grid.last() != Some(&x) {
            grid.push(x);
        }
    }
    Ok(grid)
}

fn score(cfg: &RunConfig) -> Result<u8, Failure> {
    let (p, theta0) = target(cfg)?;
    let cmp = cfg.compare.as_ref().ok_or_else(|| Failure::Usage("score needs --compare".into()))?;
    let q = lookup(&cmp.family, &cmp.params)?;
    let pair = match cfg.restriction {
        Some(r) => {
            let iv = Interval::new(r.lo.unwrap_or(f64::NEG_INFINITY), r.hi.unwrap_or(f64::INFINITY))
                .map_err(steinforge::SteinError::from)?;
            ScorePair::restricted(p.clone(), q, theta0.clone(), iv)?
        }
        None => ScorePair::new(p.clone(), q, theta0.clone())?,
    };
    let forms: Vec<TestFunction> = match p.structure() {
        Structure::Location => battery(cfg)?.iter().map(|f| location_form(f, theta0[0])).collect(),
        Structure::Scale => battery(cfg)?.iter().map(|f| scale_form(f, theta0[0])).collect(),
        _ => {
            return Err(steinforge::SteinError::Capability(format!(
                "score needs a location or scale family; {} is neither",
                p.name()
            ))
            .into())
        }
    };
    let grid = score_grid(cfg, &pair)?;
    let reports: Vec<FactorizationReport> =
        forms.iter().map(|f| pair.factorization(f, &grid)).collect::<steinforge::Result<_>>()?;
    let tol = tolerance(cfg)?.unwrap_or(FACTOR_TOL);
    let worst = reports.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    let rows = r_rows(&pair, &grid);
    let functions: Vec<Value> = reports
        .iter()
        .map(|r| json!({"test_function": r.test_function, "max_deviation": r.max_deviation, "failures": r.failures}))
        .collect();
    let mut result = json!({
        "p": pair.p().label(),
        "q": pair.q().label(),
        "theta0": theta0,
        "domain": to_value(&pair.domain()),
        "grid_points": grid.len(),
        "tolerance": tol,
        "max_deviation": worst,
        "functions": functions,
    });
    match &cfg.out {
        Some(dir) => {
            write_file(dir, "score_r.csv", &r_csv(theta0.len(), &rows))?;
            result["r_table"] = json!("score_r.csv");
        }
        None => {
            result["r_table"] = rows.iter().map(|(x, r)| json!({"x": x, "r": r})).collect();
        }
    }
    emit(cfg, "score.json", &envelope(Command::Score, cfg, result))?;
    if worst > tol {
        eprintln!("steinforge: factorization deviation {worst:.3e} exceeds tolerance {tol:.1e}");
        return Ok(3);
    }
    Ok(0)
}

/// `(x, r(x))` at the grid points where the score is defined.
fn r_rows(pair: &ScorePair, grid: &[f64]) -> Vec<(f64, Vec<f64>)> {
    grid.iter().filter_map(|&x| pair.generalized_score(x).ok().map(|r| (x, r))).collect()
}

fn r_csv(dim: usize, rows: &[(f64, Vec<f64>)]) -> String {
    let mut out = String::from("x");
    for j in 0..dim {
        let _ = if dim == 1 { write!(out, ",r") } else { write!(out, ",r_{}", j + 1) };
    }
    out.push('\n');
    for (x, r) in rows {
        let _ = write!(out, "{x:e}");
        for v in r {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}

fn gof(cfg: &RunConfig) -> Result<u8, Failure> {
    let op = operator(cfg)?;
    let battery = battery(cfg)?;
    let path = cfg.samples.as_deref().ok_or_else(|| Failure::Usage("gof needs --samples".into()))?;
    let format = cfg.samples_format.unwrap_or_else(|| SampleFormat::from_path(path));
    let samples = load_samples(path, format)?;
    let result = gof_test(&samples, &op, &battery, cfg.alpha.unwrap_or(0.05), cfg.seed.unwrap_or(0), cfg.n_sim.unwrap_or(200))?;
    emit(cfg, "gof.json", &envelope(Command::Gof, cfg, to_value(&result)))?;
    Ok(match result.decision {
        Decision::Accept => 0,
        Decision::Reject => 1,
    })
}

fn families(cfg: &RunConfig) -> Result<u8, Failure> {
    let infos = list_families();
    if cfg.out.is_some() {
        emit(cfg, "families.json", &to_value(&infos))?;
        return Ok(0);
    }
    let header = ["name", "kind", "structure", "parameter", "params", "theta0", "source"].map(String::from);
    let rows: Vec<[String; 7]> = infos
        .into_iter()
        .map(|f| {
            [
                f.name,
                format!("{:?}", f.kind).to_lowercase(),
                format!("{:?}", f.structure).to_lowercase(),
                f.parameter,
                f.params,
                format!("{:?}", f.default_theta0),
                if f.builtin { "builtin" } else { "custom" }.to_string(),
            ]
        })
        .collect();
    let mut widths = header.clone().map(|h| h.chars().count());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    for r in std::iter::once(&header).chain(&rows) {
        let line: Vec<String> = r.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        stdout(&format!("{}\n", line.join("  ").trim_end()));
    }
    Ok(0)
}
