//! Text and structured renderings of a run report.

use std::fmt::Write;

use crate::runner::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

pub fn render(report: &RunReport, format: Format) -> String {
    match format {
        Format::Text => to_text(report),
        Format::Structured => to_structured(report),
    }
}

/// Pretty JSON; field order is fixed by the report types.
pub fn to_structured(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

pub fn from_structured(text: &str) -> serde_json::Result<RunReport> {
    serde_json::from_str(text)
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

/// Human-readable report with one table row per condition.
pub fn to_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", report.tool, report.version);
    let _ = writeln!(out, "input:  {}", report.input);
    let _ = writeln!(out, "sha256: {}", report.input_sha256);
    let _ = writeln!(out, "coordinates: {}", report.coordinates.join(", "));
    let _ = writeln!(
        out,
        "plan:   seed {}  samples {}  tol_pass {}  tol_fail {}",
        report.plan.seed,
        report.plan.count,
        sci(report.plan.tol_pass),
        sci(report.plan.tol_fail)
    );
    for (i, c) in report.checks.iter().enumerate() {
        let r = &c.report;
        let _ = writeln!(out);
        let expected = match c.expected {
            Some(v) if v == r.verdict => format!("  (expected {v})"),
            Some(v) => format!("  (expected {v}, MISMATCH)"),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "[{}] {}({}): {}{}",
            i + 1,
            c.check,
            c.args.join(", "),
            r.verdict,
            expected
        );
        let bounds: Vec<String> = c
            .plan
            .bounds
            .iter()
            .map(|(lo, hi)| format!("[{lo}, {hi}]"))
            .collect();
        let _ = writeln!(
            out,
            "    seed {}  samples {}/{}  rejected {}  tol_pass {}  tol_fail {}",
            r.seed,
            r.accepted,
            r.requested,
            r.rejected,
            sci(r.tol_pass),
            sci(r.tol_fail)
        );
        let _ = writeln!(out, "    box {}", bounds.join(" x "));
        if !r.conditions.is_empty() {
            let width = r
                .conditions
                .iter()
                .map(|c| c.condition_id.len())
                .max()
                .unwrap_or(0)
                .max("condition".len());
            let _ = writeln!(
                out,
                "    {:<width$}  {:>10}  {:>10}  {:>9}  {:<12}  worst point",
                "condition", "max", "mean", "failed", "verdict"
            );
            for cond in &r.conditions {
                let _ = writeln!(
                    out,
                    "    {:<width$}  {:>10}  {:>10}  {:>9}  {:<12}  {}",
                    cond.condition_id,
                    sci(cond.max_residual),
                    sci(cond.mean_residual),
                    format!("{}/{}", cond.failed, cond.evaluated),
                    cond.verdict.as_str(),
                    point(&cond.worst_point)
                );
            }
        }
        for (reason, n) in &r.rejections {
            let _ = writeln!(out, "    rejected {n}: {reason}");
        }
        for (k, v) in &r.extras {
            let _ = writeln!(out, "    {k} = {v}");
        }
        for note in &r.notes {
            let _ = writeln!(out, "    note: {note}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "overall: {} (exit {})",
        report.verdict, report.exit_status
    );
    out
}
