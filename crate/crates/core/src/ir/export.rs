// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::types::*;
use super::validate::{bundle_ids, NodeKind};
use crate::kg::SignalIndex;

pub const NODES_HEADER: &str = "id,type,run_id,attributes";
pub const EDGES_HEADER: &str = "src,dst,type,run_id,attributes";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeRow {
    pub id: String,
    pub kind: String,
    pub run_id: String,
    /// Serialized JSON object.
    pub attributes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EdgeRow {
    pub src: String,
    pub dst: String,
    pub kind: String,
    pub run_id: String,
    pub attributes: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphRows {
    pub nodes: Vec<NodeRow>,
    pub edges: Vec<EdgeRow>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExportError {
    #[error("link {kind} {src} -> {dst} references unknown node '{missing}'")]
    Dangling {
        src: String,
        dst: String,
        kind: String,
        missing: String,
    },
    #[error("link {kind} {src} -> {dst}: endpoint kind mismatch ({src_kind} -> {dst_kind})")]
    Schema {
        src: String,
        dst: String,
        kind: String,
        src_kind: String,
        dst_kind: String,
    },
    #[error("csv: {0}")]
    Csv(String),
}

/// Structural edge types added alongside the trace links.
pub const CONTAINS: &str = "contains";
pub const PRECEDES: &str = "precedes";
pub const MENTIONS: &str = "mentions";
pub const REFERENCES: &str = "references";

fn attrs<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("artifact serializes")
}

/// Identifier-like tokens of a property source, skipping system functions,
/// macro uses and keywords.
fn identifiers(text: &str) -> Vec<&str> {
    const KEYWORDS: &[&str] = &[
        "assert", "assume", "cover", "property", "posedge", "negedge", "disable", "iff", "default", "clocking",
        "define",
    ];
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'.') {
                i += 1;
            }
            let prev = if start > 0 { b[start - 1] } else { b' ' };
            let word = text[start..i].trim_end_matches('.');
            let is_label = text[..start].trim().is_empty() && text[i..].trim_start().starts_with(':');
            if prev != b'$' && prev != b'`' && prev != b'\'' && !is_label && !KEYWORDS.contains(&word) {
                out.push(word);
            }
        } else if c.is_ascii_digit() {
            // sized literals such as 4'hF carry letters
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'\'' || b[i] == b'_') {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Node and edge rows for a bundle, sorted by (type, id) and
/// (type, src, dst) respectively.
pub fn export_graph(b: &RunBundle) -> Result<GraphRows, ExportError> {
    let run = b.context.run_id.as_str();
    let mut nodes = Vec::new();
    let mut node = |id: &str, kind: NodeKind, a: String| {
        nodes.push(NodeRow {
            id: id.to_string(),
            kind: kind.as_str().to_string(),
            run_id: run.to_string(),
            attributes: a,
        })
    };
    for c in b.chunks() {
        node(&c.chunk_id, NodeKind::SpecChunk, attrs(c));
    }
    for q in b.reqs() {
        node(&q.req_id, NodeKind::Requirement, attrs(q));
    }
    for p in b.props() {
        node(&p.prop_id, NodeKind::Property, attrs(p));
    }
    for x in b.results() {
        node(&x.result_id, NodeKind::FormalResult, attrs(x));
    }
    for x in b.cexes() {
        node(&x.cex_id, NodeKind::CexCase, attrs(x));
    }
    for x in b.coverage() {
        node(&x.cov_id, NodeKind::Coverage, attrs(x));
    }
    if let Some(dm) = &b.design_model {
        for m in &dm.modules {
            let a = json!({
                "name": m.name, "line": m.line, "ports": m.ports, "parameters": m.parameters,
                "instances": m.instances, "clocks": m.clocks,
                "fsms": dm.fsms.iter().filter(|f| f.module == m.name).collect::<Vec<_>>(),
                "top": dm.top.as_deref() == Some(m.name.as_str()),
            });
            node(&format!("mod:{}", m.name), NodeKind::Module, a.to_string());
        }
        for s in &dm.hierarchy {
            node(&format!("sig:{}", s.path), NodeKind::Signal, attrs(s));
        }
        for s in &dm.statements {
            node(&s.id, NodeKind::Statement, attrs(s));
        }
    }
    nodes.sort_by(|a, b| (&a.kind, &a.id).cmp(&(&b.kind, &b.id)));

    let ids = bundle_ids(b);
    let mut edges: BTreeMap<(String, String, String), String> = BTreeMap::new();
    let mut edge = |src: &str, dst: &str, kind: &str, a: Value| {
        edges
            .entry((kind.to_string(), src.to_string(), dst.to_string()))
            .or_insert_with(|| a.to_string());
    };
    for l in b.links() {
        let kind = l.link_kind.as_str();
        for end in [&l.src_id, &l.dst_id] {
            if !ids.contains_key(end) {
                return Err(ExportError::Dangling {
                    src: l.src_id.clone(),
                    dst: l.dst_id.clone(),
                    kind: kind.into(),
                    missing: end.clone(),
                });
            }
        }
        let (s, d) = (ids[&l.src_id], ids[&l.dst_id]);
        if !NodeKind::link_allowed(l.link_kind, s, d) {
            return Err(ExportError::Schema {
                src: l.src_id.clone(),
                dst: l.dst_id.clone(),
                kind: kind.into(),
                src_kind: s.to_string(),
                dst_kind: d.to_string(),
            });
        }
        edge(&l.src_id, &l.dst_id, kind, json!({}));
    }
    let mut chunks: Vec<&SpecChunk> = b.chunks().iter().collect();
    chunks.sort_by_key(|c| c.order_index);
    for w in chunks.windows(2) {
        edge(&w[0].chunk_id, &w[1].chunk_id, PRECEDES, json!({}));
    }
    for x in b.cexes() {
        if let Some(r) = &x.result_id {
            if ids.get(r) == Some(&NodeKind::FormalResult) {
                edge(r, &x.cex_id, CONTAINS, json!({}));
            }
        }
    }
    if let Some(dm) = &b.design_model {
        for s in &dm.hierarchy {
            edge(&format!("mod:{}", s.module), &format!("sig:{}", s.path), CONTAINS, json!({}));
        }
        for s in &dm.statements {
            edge(&format!("mod:{}", s.module), &s.id, CONTAINS, json!({}));
        }
        for m in &dm.modules {
            for inst in &m.instances {
                if dm.module(&inst.module).is_some() {
                    edge(
                        &format!("mod:{}", m.name),
                        &format!("mod:{}", inst.module),
                        CONTAINS,
                        json!({ "instance": inst.name }),
                    );
                }
            }
        }
        let idx = SignalIndex::from_design(dm);
        let unique = |m: &str| match idx.resolve(m).as_slice() {
            [one] => Some(one.clone()),
            _ => None,
        };
        for t in b.plan() {
            if !ids.contains_key(&t.req_id) {
                continue;
            }
            for m in &t.observable_signals {
                if let Some(p) = unique(m) {
                    edge(&t.req_id, &format!("sig:{p}"), MENTIONS, json!({ "mention": m }));
                }
            }
        }
        for p in b.props() {
            let mut seen = BTreeSet::new();
            for m in identifiers(&p.sva_text) {
                if let Some(path) = unique(m) {
                    if seen.insert(path.clone()) {
                        edge(&p.prop_id, &format!("sig:{path}"), MENTIONS, json!({ "mention": m }));
                    }
                }
            }
        }
        for c in b.coverage() {
            for s in &c.unreachable_statements {
                if ids.get(s) == Some(&NodeKind::Statement) {
                    edge(&c.cov_id, s, REFERENCES, json!({ "gap": true }));
                }
            }
        }
    }
    let edges = edges
        .into_iter()
        .map(|((kind, src, dst), a)| EdgeRow {
            src,
            dst,
            kind,
            run_id: run.to_string(),
            attributes: a,
        })
        .collect();
    Ok(GraphRows { nodes, edges })
}

fn csv_text(header: &str, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn write_nodes_csv(rows: &[NodeRow]) -> String {
    csv_text(
        NODES_HEADER,
        rows.iter()
            .map(|r| vec![r.id.clone(), r.kind.clone(), r.run_id.clone(), r.attributes.clone()]),
    )
}

pub fn write_edges_csv(rows: &[EdgeRow]) -> String {
    csv_text(
        EDGES_HEADER,
        rows.iter().map(|r| {
            vec![
                r.src.clone(),
                r.dst.clone(),
                r.kind.clone(),
                r.run_id.clone(),
                r.attributes.clone(),
            ]
        }),
    )
}

fn read_csv(text: &str, header: &str) -> Result<Vec<Vec<String>>, ExportError> {
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let h = rd.headers().map_err(|e| ExportError::Csv(e.to_string()))?;
    if h.iter().collect::<Vec<_>>().join(",") != header {
        return Err(ExportError::Csv(format!("expected header '{header}'")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| ExportError::Csv(e.to_string()))?;
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(out)
}

pub fn read_nodes_csv(text: &str) -> Result<Vec<NodeRow>, ExportError> {
    Ok(read_csv(text, NODES_HEADER)?
        .into_iter()
        .map(|mut r| NodeRow {
            attributes: r.pop().unwrap_or_default(),
            run_id: r.pop().unwrap_or_default(),
            kind: r.pop().unwrap_or_default(),
            id: r.pop().unwrap_or_default(),
        })
        .collect())
}

pub fn read_edges_csv(text: &str) -> Result<Vec<EdgeRow>, ExportError> {
    Ok(read_csv(text, EDGES_HEADER)?
        .into_iter()
        .map(|mut r| EdgeRow {
            attributes: r.pop().unwrap_or_default(),
            run_id: r.pop().unwrap_or_default(),
            kind: r.pop().unwrap_or_default(),
            dst: r.pop().unwrap_or_default(),
            src: r.pop().unwrap_or_default(),
        })
        .collect())
}
