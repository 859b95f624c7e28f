//! Plain-text renderings for `--text`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nullcqa_core::constraints::{AcyclicityReport, DependencyGraph};
use nullcqa_core::relational::{Instance, Schema};
use nullcqa_core::repair::RepairSet;
use nullcqa_core::satisfaction::SatisfactionReport;

/// One table per non-empty relation, columns headed by attribute names.
pub fn tables(schema: &Schema, d: &Instance) -> String {
    let mut out = String::new();
    for decl in schema.predicates() {
        let rows: Vec<Vec<String>> = d
            .relation(&decl.name)
            .map(|a| a.args.iter().map(|v| v.to_string()).collect())
            .collect();
        if rows.is_empty() {
            continue;
        }
        let mut widths: Vec<usize> = decl.attributes.iter().map(|a| a.chars().count()).collect();
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string()
        };
        let indent = " ".repeat(decl.name.chars().count());
        let _ = writeln!(out, "{}  {}", decl.name, line(&decl.attributes));
        for row in &rows {
            let _ = writeln!(out, "{indent}  {}", line(row));
        }
    }
    out
}

pub fn check(report: &SatisfactionReport) -> String {
    let mut out = String::from(if report.consistent { "consistent\n" } else { "inconsistent\n" });
    for v in &report.constraints {
        let status = if v.satisfied { "satisfied" } else { "violated" };
        let _ = writeln!(out, "  {} ({}): {status}", v.label, v.kind);
        for val in &v.violations {
            let binding: Vec<String> = val.iter().map(|(k, x)| format!("{k}={x}")).collect();
            let _ = writeln!(out, "    {}", binding.join(", "));
        }
    }
    out
}

pub fn graph(g: &DependencyGraph, acyclic: &AcyclicityReport) -> String {
    let mut out = String::new();
    for v in 0..g.vertices.len() {
        let _ = writeln!(out, "{}", g.vertex_label(v));
    }
    for e in &g.edges {
        let _ = writeln!(out, "{} -> {}  [{}]", g.vertex_label(e.from), g.vertex_label(e.to), e.constraint);
    }
    match &acyclic.cycle {
        None => out.push_str("RIC-acyclic\n"),
        Some(cycle) => {
            let _ = writeln!(out, "RIC-cyclic: {}", cycle.join(" -> "));
        }
    }
    out
}

pub fn repairs(schema: &Schema, reps: &RepairSet) -> String {
    let mut out = String::new();
    for (i, r) in reps.repairs.iter().enumerate() {
        let _ = writeln!(out, "repair {}  delta {}", i + 1, r.delta);
        out.push_str(&tables(schema, &r.instance));
        out.push('\n');
    }
    let _ = writeln!(out, "{} repair(s)", reps.len());
    out
}

pub fn databases(dbs: &BTreeSet<Instance>) -> String {
    let mut out = String::new();
    for (i, d) in dbs.iter().enumerate() {
        let _ = writeln!(out, "database {}: {d}", i + 1);
    }
    out
}

pub fn models(models: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (i, m) in models.iter().enumerate() {
        let _ = writeln!(out, "model {}: {{{}}}", i + 1, m.join(", "));
    }
    if models.is_empty() {
        out.push_str("no stable models\n");
    }
    out
}
