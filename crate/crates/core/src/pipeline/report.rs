// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::ir::{export_graph, DeadCodeClass, FormalStatus, LoopKind, Outcome, PropStatus, RunBundle};
use crate::kg::build_graph;
use crate::sva::PropKind;

/// Properties checked, proven, and not proven.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

impl Tally {
    pub fn cell(&self) -> String {
        format!("{} | {} | {}", self.total, self.passed, self.failed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub run_id: String,
    /// First verdict of every property the generation stage produced.
    pub generation: Tally,
    pub generation_disabled: usize,
    pub syntax_attempts: usize,
    pub syntax_fixed: usize,
    pub syntax_disabled: usize,
    pub cex_cases: usize,
    pub cex_corrected: usize,
    pub cex_not_corrected: usize,
    pub cex_rtl_bugs: usize,
    pub cex_attempts: usize,
    pub reachable_pct: Option<f64>,
    pub statements_covered: usize,
    pub statements_total: usize,
    pub defensive: usize,
    pub coverage_properties: usize,
    /// Current verdict of every assertion and cover.
    pub end_to_end: Tally,
    pub vacuous: usize,
    pub fix_attempts: usize,
    pub kg_nodes: usize,
    pub kg_edges: usize,
}

fn is_coverage_origin(notes: &[crate::ir::AttemptNote]) -> bool {
    notes.iter().any(|n| n.loop_kind == LoopKind::Coverage)
}

/// Tallies recomputed from the bundle alone.
pub fn report(b: &RunBundle) -> RunReport {
    let mut r = RunReport {
        run_id: b.context.run_id.clone(),
        ..RunReport::default()
    };
    let checked: Vec<_> = b.props().iter().filter(|p| p.kind != PropKind::Assumption).collect();
    let mut first: BTreeMap<&str, FormalStatus> = BTreeMap::new();
    let mut results: Vec<_> = b.results().iter().collect();
    results.sort_by(|a, b| a.result_id.cmp(&b.result_id));
    for x in results {
        first.entry(x.prop_id.as_str()).or_insert(x.status);
    }
    let current = b.current_results();
    let tally = |props: &[&crate::ir::PropertyRecord], status: &dyn Fn(&str) -> Option<FormalStatus>| {
        let total = props.len();
        let passed = props.iter().filter(|p| status(&p.prop_id) == Some(FormalStatus::Proven)).count();
        Tally {
            total,
            passed,
            failed: total - passed,
        }
    };
    let generated: Vec<_> = checked.iter().copied().filter(|p| !is_coverage_origin(&p.attempt_history)).collect();
    r.generation = tally(&generated, &|id| first.get(id).copied());
    r.generation_disabled = b
        .props()
        .iter()
        .filter(|p| p.attempt_history.iter().any(|n| n.loop_kind == LoopKind::Review && n.outcome == Outcome::Disabled))
        .count();
    r.end_to_end = tally(&checked, &|id| current.get(id).map(|x| x.status));
    r.vacuous = current.values().filter(|x| x.status == FormalStatus::Vacuous).count();

    for p in b.props() {
        for n in p.attempt_history.iter().filter(|n| n.loop_kind == LoopKind::Syntax) {
            r.syntax_attempts += 1;
            match n.outcome {
                Outcome::Fixed => r.syntax_fixed += 1,
                Outcome::Disabled => r.syntax_disabled += 1,
                Outcome::Retry => {}
            }
        }
    }
    r.cex_cases = b.cexes().len();
    r.cex_corrected = b.cexes().iter().filter(|c| c.attempts.iter().any(|a| a.outcome == Outcome::Fixed)).count();
    r.cex_not_corrected = r.cex_cases - r.cex_corrected;
    r.cex_rtl_bugs = b.cexes().iter().filter(|c| c.root_cause == Some(crate::ir::RootCause::RtlBug)).count();
    r.cex_attempts = b.cexes().iter().map(|c| c.attempts.len()).sum();
    if let Some(c) = b.latest_coverage() {
        r.reachable_pct = Some(c.reachable_pct);
        r.statements_covered = c.covered_statements.len();
        r.statements_total = c.covered_statements.len() + c.unreachable_statements.len();
        r.defensive = c.dead_code.iter().filter(|d| d.classification == DeadCodeClass::Defensive).count();
    }
    r.coverage_properties = b
        .props()
        .iter()
        .filter(|p| p.status == PropStatus::Active && is_coverage_origin(&p.attempt_history))
        .count();
    r.fix_attempts = r.syntax_attempts + r.cex_attempts;
    if let Ok(rows) = export_graph(b) {
        if let Ok(g) = build_graph(&rows.nodes, &rows.edges) {
            r.kg_nodes = g.node_count();
            r.kg_edges = g.edge_count();
        }
    }
    r
}

/// Text table grouped by row family. T | P | F reads total, proven, and
/// not proven (failed, vacuous, bounded, errored or disabled).
pub fn render_table(r: &RunReport) -> String {
    let pct = r.reachable_pct.map_or("n/a".to_string(), |p| format!("{p:.1}"));
    let rows: Vec<(&str, &str, String)> = vec![
        ("property generation", "properties T | P | F", r.generation.cell()),
        ("property generation", "disabled after review", r.generation_disabled.to_string()),
        ("syntax correction", "fix attempts", r.syntax_attempts.to_string()),
        ("syntax correction", "fixed | disabled", format!("{} | {}", r.syntax_fixed, r.syntax_disabled)),
        ("cex correction", "cases", r.cex_cases.to_string()),
        ("cex correction", "corrected | not corrected", format!("{} | {}", r.cex_corrected, r.cex_not_corrected)),
        ("cex correction", "rtl bugs documented", r.cex_rtl_bugs.to_string()),
        ("cex correction", "fix attempts", r.cex_attempts.to_string()),
        ("coverage improvement", "reachable statements %", pct),
        ("coverage improvement", "statements covered / total", format!("{} / {}", r.statements_covered, r.statements_total)),
        ("coverage improvement", "defensive statements", r.defensive.to_string()),
        ("coverage improvement", "properties added", r.coverage_properties.to_string()),
        ("end-to-end", "properties T | P | F", r.end_to_end.cell()),
        ("end-to-end", "vacuous", r.vacuous.to_string()),
        ("end-to-end", "fix attempts", r.fix_attempts.to_string()),
        ("kg size", "nodes | edges", format!("{} | {}", r.kg_nodes, r.kg_edges)),
    ];
    let w0 = rows.iter().map(|x| x.0.len()).max().unwrap_or(0).max("family".len());
    let w1 = rows.iter().map(|x| x.1.len()).max().unwrap_or(0).max("metric".len());
    let mut out = String::new();
    if !r.run_id.is_empty() {
        let _ = writeln!(out, "run {}", r.run_id);
    }
    let _ = writeln!(out, "{:<w0$} | {:<w1$} | value", "family", "metric");
    let _ = writeln!(out, "{}", "-".repeat(w0 + w1 + 14));
    for (a, b, c) in rows {
        let _ = writeln!(out, "{a:<w0$} | {b:<w1$} | {c}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{FormalResult, PropertyRecord};

    #[test]
    fn empty_bundle_is_all_zero() {
        let r = report(&RunBundle::default());
        assert_eq!(r.end_to_end, Tally::default());
        assert_eq!((r.kg_nodes, r.kg_edges, r.cex_cases), (0, 0, 0));
        assert!(render_table(&r).contains("0 | 0 | 0"));
    }

    #[test]
    fn three_properties_two_proven() {
        let prop = |i: u32| PropertyRecord {
            prop_id: format!("PROP-00{i}"),
            req_ids: vec![],
            kind: PropKind::Assertion,
            sva_text: String::new(),
            line_span: (i, i),
            status: PropStatus::Active,
            attempt_history: vec![],
        };
        let res = |i: u32, s: FormalStatus| FormalResult {
            result_id: format!("RES-00{i}"),
            prop_id: format!("PROP-00{i}"),
            status: s,
            proof_depth: None,
            runtime: 0,
            artifact_path: Some("w.vcd".into()),
            stage: "formal".into(),
            stale: false,
            external: false,
            message: None,
        };
        let b = RunBundle {
            properties: Some(vec![prop(1), prop(2), prop(3)]),
            formal_results: Some(vec![res(1, FormalStatus::Proven), res(2, FormalStatus::Proven), res(3, FormalStatus::Cex)]),
            ..RunBundle::default()
        };
        let r = report(&b);
        assert_eq!(r.end_to_end.cell(), "3 | 2 | 1");
        assert_eq!(r.generation.cell(), "3 | 2 | 1");
        assert_eq!(report(&b), r);
    }
}
