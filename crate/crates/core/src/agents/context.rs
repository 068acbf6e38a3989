// SPDX-License-Identifier: Apache-2.0

//! Rendering of graph neighbourhoods into envelope sections.

use serde_json::Value;

use crate::kg::{ContextBundle, Graph};

fn attr<'a>(g: &'a Graph, id: &str, key: &str) -> Option<&'a Value> {
    g.node(id)?.attributes.get(key)
}

pub fn attr_str(g: &Graph, id: &str, key: &str) -> String {
    match attr(g, id, key) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(v) => v.to_string(),
    }
}

pub fn requirement(g: &Graph, req_ids: &[String]) -> String {
    req_ids
        .iter()
        .map(|r| format!("{r}: {}", attr_str(g, r, "text")))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn spec_fragment(g: &Graph, cb: &ContextBundle) -> String {
    let mut out = Vec::new();
    for m in cb.of_kind("spec_chunk") {
        let path: Vec<String> = match attr(g, &m.id, "heading_path") {
            Some(Value::Array(a)) => a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
            _ => Vec::new(),
        };
        out.push(format!("[{}] {}\n{}", m.id, path.join(" > "), attr_str(g, &m.id, "text").trim()));
    }
    out.join("\n\n")
}

fn signal_row(g: &Graph, id: &str) -> String {
    let dir = attr_str(g, id, "direction");
    format!(
        "{} width={} kind={}{}",
        id.trim_start_matches("sig:"),
        attr_str(g, id, "width"),
        attr_str(g, id, "kind"),
        if dir.is_empty() { String::new() } else { format!(" dir={dir}") }
    )
}

/// Signals of the neighbourhood; every signal of the graph when the
/// neighbourhood holds none.
pub fn signal_table(g: &Graph, cb: &ContextBundle) -> String {
    signal_rows(g, cb.of_kind("signal").map(|m| m.id.as_str()).collect())
}

pub fn all_signals(g: &Graph) -> String {
    signal_rows(g, Vec::new())
}

fn signal_rows<'a>(g: &'a Graph, mut ids: Vec<&'a str>) -> String {
    if ids.is_empty() {
        ids = g.nodes().iter().filter(|n| n.kind == "signal").map(|n| n.id.as_str()).collect();
    }
    ids.sort();
    ids.iter().map(|id| signal_row(g, id)).collect::<Vec<_>>().join("\n")
}

pub fn prior_code(g: &Graph, cb: &ContextBundle, skip: &str) -> String {
    cb.of_kind("property")
        .filter(|m| m.id != skip)
        .map(|m| attr_str(g, &m.id, "sva_text"))
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
