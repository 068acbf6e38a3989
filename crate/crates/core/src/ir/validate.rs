// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::export::{EDGES_HEADER, NODES_HEADER};
use super::types::*;
use crate::rtl::DesignModel;

/// Node type labels shared by the exported rows and the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    SpecChunk,
    Requirement,
    Property,
    FormalResult,
    CexCase,
    Coverage,
    Module,
    Signal,
    Statement,
}

impl NodeKind {
    pub const ALL: [NodeKind; 9] = [
        NodeKind::SpecChunk,
        NodeKind::Requirement,
        NodeKind::Property,
        NodeKind::FormalResult,
        NodeKind::CexCase,
        NodeKind::Coverage,
        NodeKind::Module,
        NodeKind::Signal,
        NodeKind::Statement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::SpecChunk => "spec_chunk",
            NodeKind::Requirement => "requirement",
            NodeKind::Property => "property",
            NodeKind::FormalResult => "formal_result",
            NodeKind::CexCase => "cex_case",
            NodeKind::Coverage => "coverage",
            NodeKind::Module => "module",
            NodeKind::Signal => "signal",
            NodeKind::Statement => "statement",
        }
    }

    pub fn parse(s: &str) -> Option<NodeKind> {
        NodeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Kind implied by the identifier scheme. Anything without a known
    /// prefix is a property, since property ids come from source labels.
    pub fn from_id(id: &str) -> NodeKind {
        let prefixed = |p: &str| id.strip_prefix(p).is_some_and(|r| r.starts_with('-'));
        if prefixed("CHUNK") {
            NodeKind::SpecChunk
        } else if prefixed("REQ") {
            NodeKind::Requirement
        } else if prefixed("RES") {
            NodeKind::FormalResult
        } else if prefixed("CEX") {
            NodeKind::CexCase
        } else if prefixed("COV") {
            NodeKind::Coverage
        } else if id.starts_with("mod:") {
            NodeKind::Module
        } else if id.starts_with("sig:") {
            NodeKind::Signal
        } else if id.len() > 1 && id.starts_with('S') && id[1..].bytes().all(|b| b.is_ascii_digit()) {
            NodeKind::Statement
        } else {
            NodeKind::Property
        }
    }

    /// Whether `link` may connect a `src` node to a `dst` node.
    pub fn link_allowed(link: LinkKind, src: NodeKind, dst: NodeKind) -> bool {
        use NodeKind::*;
        match link {
            LinkKind::DerivesFrom => src == Requirement && dst == SpecChunk,
            LinkKind::Validates => src == Property && dst == Requirement,
            LinkKind::Proves | LinkKind::Fails => src == FormalResult && dst == Property,
            LinkKind::Covers => src == Property && matches!(dst, Coverage | Statement),
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Field path such as `[2].source_chunks`; `$` for the whole document.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn parse_error(msg: &str) -> ValidationReport {
        let mut r = ValidationReport::default();
        r.push("$", format!("parse error: {msg}"));
        r
    }

    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn absorb(&mut self, prefix: &str, other: ValidationReport) {
        for v in other.violations {
            self.push(format!("{prefix}{}", v.path), v.message);
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T, ValidationReport> {
    serde_json::from_str(text).map_err(|e| ValidationReport::parse_error(&e.to_string()))
}

fn unique<'a>(r: &mut ValidationReport, field: &str, ids: impl Iterator<Item = &'a str>) {
    let mut seen = BTreeSet::new();
    for (i, id) in ids.enumerate() {
        if id.trim().is_empty() {
            r.push(format!("[{i}].{field}"), format!("{field} non-empty"));
        } else if !seen.insert(id) {
            r.push(format!("[{i}].{field}"), format!("duplicate {field} '{id}'"));
        }
    }
}

fn check_chunks(v: &[SpecChunk]) -> ValidationReport {
    let mut r = ValidationReport::default();
    unique(&mut r, "chunk_id", v.iter().map(|c| c.chunk_id.as_str()));
    for (i, c) in v.iter().enumerate() {
        if c.heading_path.is_empty() {
            r.push(format!("[{i}].heading_path"), "heading_path non-empty");
        }
        if i > 0 && c.order_index <= v[i - 1].order_index {
            r.push(format!("[{i}].order_index"), "order_index strictly increasing");
        }
    }
    r
}

fn check_reqs(v: &[Requirement]) -> ValidationReport {
    let mut r = ValidationReport::default();
    unique(&mut r, "req_id", v.iter().map(|q| q.req_id.as_str()));
    for (i, q) in v.iter().enumerate() {
        if q.source_chunks.is_empty() {
            r.push(format!("[{i}].source_chunks"), "source_chunks non-empty");
        }
    }
    r
}

fn check_plan(v: &[TestPlanEntry]) -> ValidationReport {
    let mut r = ValidationReport::default();
    for (i, t) in v.iter().enumerate() {
        if t.req_id.trim().is_empty() {
            r.push(format!("[{i}].req_id"), "req_id non-empty");
        }
    }
    r
}

fn check_notes(r: &mut ValidationReport, path: &str, notes: &[AttemptNote]) {
    let mut last: BTreeMap<LoopKind, u32> = BTreeMap::new();
    let mut count: BTreeMap<LoopKind, usize> = BTreeMap::new();
    for (j, n) in notes.iter().enumerate() {
        if !(1..=3).contains(&n.attempt_no) {
            r.push(format!("{path}[{j}].attempt_no"), "attempt_no within 1..3");
        }
        if let Some(prev) = last.insert(n.loop_kind, n.attempt_no) {
            if n.attempt_no <= prev {
                r.push(format!("{path}[{j}].attempt_no"), "attempt_no strictly increasing per loop kind");
            }
        }
        let c = count.entry(n.loop_kind).or_default();
        *c += 1;
        if *c == 4 {
            r.push(format!("{path}[{j}]"), format!("more than 3 {} attempts", n.loop_kind.as_str()));
        }
    }
}

fn check_props(v: &[PropertyRecord]) -> ValidationReport {
    let mut r = ValidationReport::default();
    unique(&mut r, "prop_id", v.iter().map(|p| p.prop_id.as_str()));
    for (i, p) in v.iter().enumerate() {
        if p.line_span.0 == 0 || p.line_span.0 > p.line_span.1 {
            r.push(format!("[{i}].line_span"), "line_span must satisfy 1 <= start <= end");
        }
        check_notes(&mut r, &format!("[{i}].attempt_history"), &p.attempt_history);
    }
    r
}

fn check_links(v: &[TraceLink], kind_of: &dyn Fn(&str) -> Option<NodeKind>) -> ValidationReport {
    let mut r = ValidationReport::default();
    let mut seen = BTreeSet::new();
    for (i, l) in v.iter().enumerate() {
        if !seen.insert(l) {
            r.push(format!("[{i}]"), "duplicate link");
        }
        match (kind_of(&l.src_id), kind_of(&l.dst_id)) {
            (Some(s), Some(d)) => {
                if !NodeKind::link_allowed(l.link_kind, s, d) {
                    r.push(
                        format!("[{i}]"),
                        format!("endpoint kind mismatch: {} {} -> {}", l.link_kind, s, d),
                    );
                }
            }
            (s, d) => {
                if s.is_none() {
                    r.push(format!("[{i}].src_id"), format!("dangling reference '{}'", l.src_id));
                }
                if d.is_none() {
                    r.push(format!("[{i}].dst_id"), format!("dangling reference '{}'", l.dst_id));
                }
            }
        }
    }
    r
}

fn check_results(v: &[FormalResult]) -> ValidationReport {
    let mut r = ValidationReport::default();
    unique(&mut r, "result_id", v.iter().map(|x| x.result_id.as_str()));
    for (i, x) in v.iter().enumerate() {
        if x.status == FormalStatus::Cex && x.artifact_path.is_none() {
            r.push(format!("[{i}].artifact_path"), "status=cex requires artifact_path");
        }
    }
    r
}

fn check_cexes(v: &[CexCase]) -> ValidationReport {
    let mut r = ValidationReport::default();
    unique(&mut r, "cex_id", v.iter().map(|x| x.cex_id.as_str()));
    for (i, x) in v.iter().enumerate() {
        check_notes(&mut r, &format!("[{i}].attempts"), &x.attempts);
    }
    r
}

fn check_coverage(v: &[CoverageMetrics]) -> ValidationReport {
    let mut r = ValidationReport::default();
    unique(&mut r, "cov_id", v.iter().map(|x| x.cov_id.as_str()));
    for (i, c) in v.iter().enumerate() {
        let covered: BTreeSet<&String> = c.covered_statements.iter().collect();
        if c.unreachable_statements.iter().any(|s| covered.contains(s)) {
            r.push(format!("[{i}]"), "covered and unreachable statements overlap");
        }
        let want = CoverageMetrics::percent(c.covered_statements.len(), c.unreachable_statements.len());
        if !(c.reachable_pct - want).abs().le(&0.05) {
            r.push(
                format!("[{i}].reachable_pct"),
                format!("reachable_pct {} differs from {want:.2}", c.reachable_pct),
            );
        }
        if let Some(p) = c.proof_core_ratio {
            if !(0.0..=100.0).contains(&p) {
                r.push(format!("[{i}].proof_core_ratio"), "percentage out of range");
            }
        }
    }
    r
}

fn check_design(m: &DesignModel) -> ValidationReport {
    let mut r = ValidationReport::default();
    for msg in m.check_invariants() {
        r.push("$", msg);
    }
    r
}

fn check_context(c: &RunContext) -> ValidationReport {
    let mut r = ValidationReport::default();
    for k in c.artifact_paths.keys() {
        if ArtifactKind::from_key(k).is_none() {
            r.push(format!("artifact_paths.{k}"), "unknown artifact kind");
        }
    }
    r
}

fn check_csv(text: &str, header: &str) -> ValidationReport {
    let mut r = ValidationReport::default();
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    match rd.headers() {
        Ok(h) => {
            let got: Vec<&str> = h.iter().collect();
            if got.join(",") != header {
                r.push("$", format!("header must be '{header}'"));
                return r;
            }
        }
        Err(e) => return ValidationReport::parse_error(&e.to_string()),
    }
    let cols = header.split(',').count();
    for (i, rec) in rd.records().enumerate() {
        match rec {
            Ok(rec) => {
                if rec.len() != cols {
                    r.push(format!("[{i}]"), format!("expected {cols} fields"));
                    continue;
                }
                if rec.iter().take(cols - 2).any(|f| f.is_empty()) {
                    r.push(format!("[{i}]"), "empty identifier or type");
                }
                if !matches!(serde_json::from_str::<serde_json::Value>(&rec[cols - 1]), Ok(serde_json::Value::Object(_))) {
                    r.push(format!("[{i}].attributes"), "attributes must be a JSON object");
                }
            }
            Err(e) => r.push(format!("[{i}]"), format!("parse error: {e}")),
        }
    }
    r
}

/// Validate one artifact document given as text.
pub fn validate_artifact(text: &str, kind: ArtifactKind) -> ValidationReport {
    fn run<T: DeserializeOwned>(text: &str, f: impl Fn(&T) -> ValidationReport) -> ValidationReport {
        match parse::<T>(text) {
            Ok(v) => f(&v),
            Err(r) => r,
        }
    }
    match kind {
        ArtifactKind::SpecChunks => run(text, |v: &Vec<SpecChunk>| check_chunks(v)),
        ArtifactKind::Requirements => run(text, |v: &Vec<Requirement>| check_reqs(v)),
        ArtifactKind::TestPlan => run(text, |v: &Vec<TestPlanEntry>| check_plan(v)),
        ArtifactKind::DesignModel => run(text, check_design),
        ArtifactKind::Properties => run(text, |v: &Vec<PropertyRecord>| check_props(v)),
        ArtifactKind::TraceLinks => run(text, |v: &Vec<TraceLink>| check_links(v, &|id| Some(NodeKind::from_id(id)))),
        ArtifactKind::FormalResults => run(text, |v: &Vec<FormalResult>| check_results(v)),
        ArtifactKind::CexCases => run(text, |v: &Vec<CexCase>| check_cexes(v)),
        ArtifactKind::CoverageMetrics => run(text, |v: &Vec<CoverageMetrics>| check_coverage(v)),
        ArtifactKind::RunContext => run(text, check_context),
        ArtifactKind::Nodes => check_csv(text, NODES_HEADER),
        ArtifactKind::Edges => check_csv(text, EDGES_HEADER),
    }
}

/// Node kinds of every id defined by the bundle.
pub(crate) fn bundle_ids(b: &RunBundle) -> BTreeMap<String, NodeKind> {
    let mut ids = BTreeMap::new();
    for c in b.chunks() {
        ids.insert(c.chunk_id.clone(), NodeKind::SpecChunk);
    }
    for q in b.reqs() {
        ids.insert(q.req_id.clone(), NodeKind::Requirement);
    }
    for p in b.props() {
        ids.insert(p.prop_id.clone(), NodeKind::Property);
    }
    for x in b.results() {
        ids.insert(x.result_id.clone(), NodeKind::FormalResult);
    }
    for x in b.cexes() {
        ids.insert(x.cex_id.clone(), NodeKind::CexCase);
    }
    for x in b.coverage() {
        ids.insert(x.cov_id.clone(), NodeKind::Coverage);
    }
    if let Some(dm) = &b.design_model {
        for m in &dm.modules {
            ids.insert(format!("mod:{}", m.name), NodeKind::Module);
        }
        for s in &dm.hierarchy {
            ids.insert(format!("sig:{}", s.path), NodeKind::Signal);
        }
        for s in &dm.statements {
            ids.insert(s.id.clone(), NodeKind::Statement);
        }
    }
    ids
}

/// Validate every member of a bundle plus the cross references between them.
pub fn validate_bundle(b: &RunBundle) -> ValidationReport {
    let mut r = ValidationReport::default();
    let name = |k: ArtifactKind| k.file_name();
    r.absorb(name(ArtifactKind::SpecChunks), check_chunks(b.chunks()));
    r.absorb(name(ArtifactKind::Requirements), check_reqs(b.reqs()));
    r.absorb(name(ArtifactKind::TestPlan), check_plan(b.plan()));
    if let Some(dm) = &b.design_model {
        r.absorb(name(ArtifactKind::DesignModel), check_design(dm));
    }
    r.absorb(name(ArtifactKind::Properties), check_props(b.props()));
    r.absorb(name(ArtifactKind::FormalResults), check_results(b.results()));
    r.absorb(name(ArtifactKind::CexCases), check_cexes(b.cexes()));
    r.absorb(name(ArtifactKind::CoverageMetrics), check_coverage(b.coverage()));
    r.absorb(name(ArtifactKind::RunContext), check_context(&b.context));

    let ids = bundle_ids(b);
    let kind_of = |id: &str| ids.get(id).copied();
    r.absorb(name(ArtifactKind::TraceLinks), check_links(b.links(), &kind_of));

    let mut refs = ValidationReport::default();
    let mut expect = |path: String, id: &str, want: NodeKind| {
        if kind_of(id) != Some(want) {
            refs.push(path, format!("reference '{id}' is not a {want}"));
        }
    };
    for (i, q) in b.reqs().iter().enumerate() {
        for (j, c) in q.source_chunks.iter().enumerate() {
            expect(format!("requirements.json[{i}].source_chunks[{j}]"), c, NodeKind::SpecChunk);
        }
    }
    for (i, t) in b.plan().iter().enumerate() {
        expect(format!("testplan.json[{i}].req_id"), &t.req_id, NodeKind::Requirement);
    }
    for (i, p) in b.props().iter().enumerate() {
        for (j, q) in p.req_ids.iter().enumerate() {
            expect(format!("properties.json[{i}].req_ids[{j}]"), q, NodeKind::Requirement);
        }
    }
    for (i, x) in b.results().iter().enumerate() {
        expect(format!("formal_results.json[{i}].prop_id"), &x.prop_id, NodeKind::Property);
    }
    for (i, x) in b.cexes().iter().enumerate() {
        expect(format!("cex_cases.json[{i}].prop_id"), &x.prop_id, NodeKind::Property);
        if let Some(res) = &x.result_id {
            expect(format!("cex_cases.json[{i}].result_id"), res, NodeKind::FormalResult);
        }
    }
    r.violations.extend(refs.violations);
    for (i, x) in b.cexes().iter().enumerate() {
        let proven = |res: &String| b.results().iter().any(|r| &r.result_id == res && r.status == FormalStatus::Proven);
        if x.result_id.as_ref().is_some_and(proven) {
            r.push(
                format!("cex_cases.json[{i}].result_id"),
                "proven result referenced by a counterexample",
            );
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requirement_checks() {
        let ok = r#"[{"req_id":"REQ-001","text":"t","category":"functional","priority":"high","source_chunks":["CHUNK-001"]}]"#;
        assert!(validate_artifact(ok, ArtifactKind::Requirements).is_empty());
        let bad = ok.replace(r#"["CHUNK-001"]"#, "[]");
        let r = validate_artifact(&bad, ArtifactKind::Requirements);
        assert_eq!(r.violations[0].message, "source_chunks non-empty");
        assert_eq!(r.violations[0].path, "[0].source_chunks");
    }

    #[test]
    fn link_endpoint_kinds() {
        let doc = r#"[{"src_id":"REQ-001","dst_id":"REQ-002","link_kind":"validates"}]"#;
        let r = validate_artifact(doc, ArtifactKind::TraceLinks);
        assert!(r.violations[0].message.starts_with("endpoint kind mismatch"), "{r}");
        let doc = r#"[{"src_id":"PROP-001","dst_id":"S4","link_kind":"covers"}]"#;
        assert!(validate_artifact(doc, ArtifactKind::TraceLinks).is_empty());
    }

    #[test]
    fn malformed_documents_report_not_panic() {
        for k in ArtifactKind::ALL {
            let r = validate_artifact("{[", k);
            assert!(!r.is_empty(), "{k:?}");
        }
    }

    #[test]
    fn id_kinds() {
        assert_eq!(NodeKind::from_id("S12"), NodeKind::Statement);
        assert_eq!(NodeKind::from_id("SAFE_1"), NodeKind::Property);
        assert_eq!(NodeKind::from_id("CHUNK-004"), NodeKind::SpecChunk);
        assert_eq!(NodeKind::from_id("sig:top.a"), NodeKind::Signal);
    }
}
