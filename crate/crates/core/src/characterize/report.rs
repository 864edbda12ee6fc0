use std::fmt::Write;

use super::{CharacterizationReport, EntryStatus, Verdict};

fn num(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.6e}"))
}

pub fn render_markdown(r: &CharacterizationReport) -> String {
    let mut s = String::new();
    let verdict = match r.verdict {
        Verdict::Characterized => "characterized",
        Verdict::Violated => "violated",
        Verdict::Inconclusive => "inconclusive",
    };
    let _ = writeln!(s, "# Characterization report: {}\n", r.family);
    let _ = writeln!(s, "- theta0: {:?}", r.theta0);
    let _ = writeln!(s, "- flavor: {}", r.flavor);
    let _ = writeln!(s, "- operator: {}", r.operator);
    let _ = writeln!(s, "- closed form: `{}`", r.closed_form);
    let _ = writeln!(s, "- verdict: **{verdict}**\n");

    if !r.necessity.is_empty() {
        let _ = writeln!(s, "## Zero expectations under the target\n");
        let _ = writeln!(s, "| test function | E[T f] | abs error | status | note |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for e in &r.necessity {
            let status = match e.status {
                EntryStatus::Zero => "zero",
                EntryStatus::Violated => "violated",
                EntryStatus::Unresolved => "unresolved",
                EntryStatus::Excluded => "excluded",
                EntryStatus::Error => "error",
            };
            let _ = writeln!(
                s,
                "| `{}` | {} | {} | {status} | {} |",
                e.label,
                num(e.expectation),
                num(e.abs_error),
                e.note.as_deref().unwrap_or("")
            );
        }
        s.push('\n');
    }

    if !r.sufficiency.is_empty() {
        let _ = writeln!(s, "## Discrimination of the alternative\n");
        let _ = writeln!(s, "| set A | alternative | E_alt[T f_A] | predicted | conditional | note |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for e in &r.sufficiency {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                e.set,
                e.alternative,
                num(e.discrimination),
                num(e.predicted),
                e.conditional,
                e.error.as_deref().unwrap_or("")
            );
        }
        s.push('\n');
    }

    if r.conditions.iter().any(|c| !c.reports.is_empty() || c.note.is_some()) {
        let _ = writeln!(s, "## Admissibility conditions\n");
        let _ = writeln!(s, "| test function | condition | verdict | c_f | max drift |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for c in &r.conditions {
            if let Some(n) = &c.note {
                let _ = writeln!(s, "| `{}` | - | - | - | {n} |", c.label);
            }
            for rep in &c.reports {
                let _ = writeln!(
                    s,
                    "| `{}` | {} | {:?} | {} | {:.3e} |",
                    c.label,
                    rep.condition,
                    rep.verdict,
                    num(rep.c_f_estimate),
                    rep.max_drift
                );
            }
        }
        s.push('\n');
    }

    for n in &r.notes {
        let _ = writeln!(s, "> {n}");
    }
    s
}
