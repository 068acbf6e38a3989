// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::ir::{export_graph, EdgeRow, ExportError, NodeKind, NodeRow, RunBundle};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: String,
    pub run_id: String,
    pub attributes: Map<String, Value>,
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub kind: String,
    pub attributes: Map<String, Value>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edges reference unknown nodes: {}", rows.join("; "))]
    Dangling { rows: Vec<String> },
    #[error("node '{0}' appears twice with different attributes")]
    Conflict(String),
    #[error("row {row}: attributes are not a JSON object")]
    Attributes { row: String },
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("'{0}' is not a property node")]
    NotProperty(String),
    #[error("unknown task kind '{0}'")]
    UnknownTask(String),
    #[error(transparent)]
    Export(#[from] ExportError),
}

/// Typed nodes and edges with adjacency in both directions.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    /// Edge rows dropped as repeats of an earlier (src, dst, type).
    pub duplicate_edges: usize,
}

fn attr_map(text: &str, row: &str) -> Result<Map<String, Value>, GraphError> {
    match serde_json::from_str(text) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(GraphError::Attributes { row: row.to_string() }),
    }
}

/// Build a graph from exported rows.
pub fn build_graph(node_rows: &[NodeRow], edge_rows: &[EdgeRow]) -> Result<Graph, GraphError> {
    let mut g = Graph::default();
    for r in node_rows {
        let attributes = attr_map(&r.attributes, &r.id)?;
        if let Some(&i) = g.index.get(&r.id) {
            let old = &g.nodes[i];
            if old.kind != r.kind || old.attributes != attributes {
                return Err(GraphError::Conflict(r.id.clone()));
            }
            continue;
        }
        let stale = attributes.get("stale").and_then(Value::as_bool).unwrap_or(false);
        g.index.insert(r.id.clone(), g.nodes.len());
        g.nodes.push(Node {
            id: r.id.clone(),
            kind: r.kind.clone(),
            run_id: r.run_id.clone(),
            attributes,
            stale,
        });
    }
    g.out_adj = vec![Vec::new(); g.nodes.len()];
    g.in_adj = vec![Vec::new(); g.nodes.len()];
    let mut dangling = Vec::new();
    let mut seen = BTreeSet::new();
    for r in edge_rows {
        let label = format!("{} -[{}]-> {}", r.src, r.kind, r.dst);
        let (Some(&s), Some(&d)) = (g.index.get(&r.src), g.index.get(&r.dst)) else {
            dangling.push(label);
            continue;
        };
        if !seen.insert((r.src.clone(), r.dst.clone(), r.kind.clone())) {
            g.duplicate_edges += 1;
            continue;
        }
        let e = g.edges.len();
        g.edges.push(Edge {
            src: r.src.clone(),
            dst: r.dst.clone(),
            kind: r.kind.clone(),
            attributes: attr_map(&r.attributes, &label)?,
        });
        g.out_adj[s].push(e);
        g.in_adj[d].push(e);
    }
    if !dangling.is_empty() {
        return Err(GraphError::Dangling { rows: dangling });
    }
    Ok(g)
}

impl Graph {
    pub fn from_bundle(b: &RunBundle) -> Result<Graph, GraphError> {
        let rows = export_graph(b)?;
        build_graph(&rows.nodes, &rows.edges)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, id: &str) -> impl Iterator<Item = &Edge> {
        let list = self.index.get(id).map(|&i| self.out_adj[i].as_slice()).unwrap_or(&[]);
        list.iter().map(|&e| &self.edges[e])
    }

    pub fn in_edges(&self, id: &str) -> impl Iterator<Item = &Edge> {
        let list = self.index.get(id).map(|&i| self.in_adj[i].as_slice()).unwrap_or(&[]);
        list.iter().map(|&e| &self.edges[e])
    }

    /// Undirected neighbors over edges accepted by `admit`, as
    /// (neighbor id, edge kind), sorted and deduplicated.
    fn neighbors(&self, id: &str, admit: &dyn Fn(&str) -> bool) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = self
            .out_edges(id)
            .filter(|e| admit(&e.kind))
            .map(|e| (e.dst.as_str(), e.kind.as_str()))
            .chain(
                self.in_edges(id)
                    .filter(|e| admit(&e.kind))
                    .map(|e| (e.src.as_str(), e.kind.as_str())),
            )
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Generation,
    SyntaxRepair,
    CexRepair,
    Coverage,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Generation => "generation",
            TaskKind::SyntaxRepair => "syntax_repair",
            TaskKind::CexRepair => "cex_repair",
            TaskKind::Coverage => "coverage",
        }
    }

    /// Edge types traversed for this task. Generation stays on trace links
    /// and structure; repair and coverage tasks also follow tool evidence.
    pub fn admits(self, edge_kind: &str) -> bool {
        const BASE: &[&str] = &["derives_from", "validates", "contains", "precedes", "mentions"];
        const EVIDENCE: &[&str] = &["proves", "fails", "covers", "references"];
        BASE.contains(&edge_kind) || (self != TaskKind::Generation && EVIDENCE.contains(&edge_kind))
    }
}

impl FromStr for TaskKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        Ok(match s {
            "generation" => TaskKind::Generation,
            "syntax_repair" => TaskKind::SyntaxRepair,
            "cex_repair" => TaskKind::CexRepair,
            "coverage" => TaskKind::Coverage,
            other => return Err(GraphError::UnknownTask(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalBounds {
    pub radius: u32,
    /// Maximum members per node type; `None` disables the cap.
    pub type_cap: Option<usize>,
}

impl Default for RetrievalBounds {
    fn default() -> Self {
        RetrievalBounds {
            radius: 2,
            type_cap: Some(20),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionReason {
    Anchor,
    /// Reached over derives_from / validates.
    Traceability,
    /// Reached over contains / precedes / mentions / references.
    Structure,
    /// Reached over proves / fails / covers.
    Evidence,
}

impl InclusionReason {
    fn via(edge_kind: &str) -> InclusionReason {
        match edge_kind {
            "derives_from" | "validates" => InclusionReason::Traceability,
            "proves" | "fails" | "covers" => InclusionReason::Evidence,
            _ => InclusionReason::Structure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Member {
    pub id: String,
    pub kind: String,
    pub hops: u32,
    pub reason: InclusionReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextBundle {
    pub anchor_id: String,
    pub task_kind: TaskKind,
    /// Nearest first, then by id.
    pub members: Vec<Member>,
    pub truncated: bool,
}

impl ContextBundle {
    pub fn ids(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.id.as_str()).collect()
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Member> + 'a {
        self.members.iter().filter(move |m| m.kind == kind)
    }
}

/// Breadth-first ball around `anchor` over the task's edge types, capped per
/// node type (nearest first, then id ascending).
pub fn neighborhood(g: &Graph, anchor: &str, task: TaskKind, bounds: RetrievalBounds) -> Result<ContextBundle, GraphError> {
    if g.node(anchor).is_none() {
        return Err(GraphError::UnknownNode(anchor.to_string()));
    }
    let admit = |k: &str| task.admits(k);
    let mut reached: BTreeMap<&str, (u32, InclusionReason)> = BTreeMap::new();
    reached.insert(anchor, (0, InclusionReason::Anchor));
    let mut layer = vec![anchor];
    for hop in 1..=bounds.radius {
        let mut next: BTreeMap<&str, InclusionReason> = BTreeMap::new();
        for id in &layer {
            for (n, via) in g.neighbors(id, &admit) {
                if reached.contains_key(n) {
                    continue;
                }
                let r = InclusionReason::via(via);
                next.entry(n).and_modify(|old| *old = (*old).min(r)).or_insert(r);
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next.keys().copied().collect();
        for (n, r) in next {
            reached.insert(n, (hop, r));
        }
    }
    let mut ordered: Vec<(u32, &str, InclusionReason)> = reached.into_iter().map(|(id, (h, r))| (h, id, r)).collect();
    ordered.sort();
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    let mut members = Vec::new();
    let mut truncated = false;
    for (hops, id, reason) in ordered {
        let kind = g.node(id).expect("reached nodes exist").kind.as_str();
        let n = per_type.entry(kind).or_default();
        if hops > 0 && bounds.type_cap.is_some_and(|cap| *n >= cap) {
            truncated = true;
            continue;
        }
        *n += 1;
        members.push(Member {
            id: id.to_string(),
            kind: kind.to_string(),
            hops,
            reason,
        });
    }
    Ok(ContextBundle {
        anchor_id: anchor.to_string(),
        task_kind: task,
        members,
        truncated,
    })
}

fn is_evidence_kind(kind: &str) -> bool {
    matches!(
        NodeKind::parse(kind),
        Some(NodeKind::FormalResult | NodeKind::CexCase | NodeKind::Coverage)
    )
}

/// Downstream direction of an evidence edge as seen from `id`, if any.
fn evidence_successors<'g>(g: &'g Graph, id: &str) -> Vec<&'g str> {
    let mut out = Vec::new();
    // results point at the property they judge
    for e in g.in_edges(id) {
        if e.kind == "proves" || e.kind == "fails" {
            out.push(e.src.as_str());
        }
    }
    for e in g.out_edges(id) {
        let src_kind = g.node(&e.src).map(|n| n.kind.as_str());
        let ok = e.kind == "covers"
            || (e.kind == "contains" && src_kind == Some(NodeKind::FormalResult.as_str()));
        if ok {
            out.push(e.dst.as_str());
        }
    }
    out
}

/// Mark every result, counterexample and coverage record downstream of a
/// property stale and return their ids.
pub fn invalidate_downstream(g: &mut Graph, prop_id: &str) -> Result<BTreeSet<String>, GraphError> {
    let node = g.node(prop_id).ok_or_else(|| GraphError::UnknownNode(prop_id.to_string()))?;
    if node.kind != NodeKind::Property.as_str() {
        return Err(GraphError::NotProperty(prop_id.to_string()));
    }
    let mut found = BTreeSet::new();
    let mut queue = VecDeque::from([prop_id.to_string()]);
    while let Some(id) = queue.pop_front() {
        for n in evidence_successors(g, &id) {
            let kind = &g.nodes[g.index[n]].kind;
            if is_evidence_kind(kind) && found.insert(n.to_string()) {
                queue.push_back(n.to_string());
            }
        }
    }
    for id in &found {
        let i = g.index[id];
        g.nodes[i].stale = true;
    }
    Ok(found)
}

/// Shortest undirected path; among equals, the lexicographically least
/// sequence of node ids.
pub fn trace_path(g: &Graph, from: &str, to: &str) -> Option<Vec<String>> {
    g.node(from)?;
    g.node(to)?;
    let all = |_: &str| true;
    let mut dist: BTreeMap<&str, u32> = BTreeMap::new();
    dist.insert(to, 0);
    let mut queue = VecDeque::from([to]);
    while let Some(id) = queue.pop_front() {
        if id == from {
            break;
        }
        let d = dist[id];
        for (n, _) in g.neighbors(id, &all) {
            if !dist.contains_key(n) {
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    let mut d = *dist.get(from)?;
    let mut path = vec![from.to_string()];
    let mut cur = from;
    while d > 0 {
        cur = g
            .neighbors(cur, &all)
            .into_iter()
            .map(|(n, _)| n)
            .find(|n| dist.get(n) == Some(&(d - 1)))
            .expect("a shortest-path predecessor exists");
        path.push(cur.to_string());
        d -= 1;
    }
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, kind: &str) -> NodeRow {
        NodeRow {
            id: id.into(),
            kind: kind.into(),
            run_id: "r".into(),
            attributes: "{}".into(),
        }
    }

    fn edge(src: &str, dst: &str, kind: &str) -> EdgeRow {
        EdgeRow {
            src: src.into(),
            dst: dst.into(),
            kind: kind.into(),
            run_id: "r".into(),
            attributes: "{}".into(),
        }
    }

    /// CHUNK <- REQ <- PROP <- RES -> CEX
    fn chain() -> Graph {
        build_graph(
            &[
                row("CHUNK-001", "spec_chunk"),
                row("REQ-001", "requirement"),
                row("PROP-001", "property"),
                row("RES-001", "formal_result"),
                row("CEX-001", "cex_case"),
            ],
            &[
                edge("REQ-001", "CHUNK-001", "derives_from"),
                edge("PROP-001", "REQ-001", "validates"),
                edge("RES-001", "PROP-001", "fails"),
                edge("RES-001", "CEX-001", "contains"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn duplicate_edges_counted_once() {
        let g = build_graph(
            &[row("A", "property"), row("B", "property")],
            &[edge("A", "B", "x"), edge("A", "B", "x")],
        )
        .unwrap();
        assert_eq!((g.node_count(), g.edge_count(), g.duplicate_edges), (2, 1, 1));
        let e = build_graph(&[row("A", "property")], &[edge("A", "Z", "x")]).unwrap_err();
        assert!(e.to_string().contains("A -[x]-> Z"));
    }

    #[test]
    fn generation_excludes_results() {
        let g = chain();
        let b = neighborhood(&g, "REQ-001", TaskKind::Generation, RetrievalBounds::default()).unwrap();
        assert_eq!(b.ids(), ["REQ-001", "CHUNK-001", "PROP-001"]);
        assert!(!b.truncated);
        let b = neighborhood(&g, "PROP-001", TaskKind::CexRepair, RetrievalBounds::default()).unwrap();
        assert!(b.ids().contains(&"RES-001") && b.ids().contains(&"CEX-001"));
    }

    #[test]
    fn caps_truncate() {
        let g = chain();
        let b = neighborhood(
            &g,
            "PROP-001",
            TaskKind::CexRepair,
            RetrievalBounds {
                radius: 2,
                type_cap: Some(0),
            },
        )
        .unwrap();
        assert_eq!(b.ids(), ["PROP-001"]);
        assert!(b.truncated);
    }

    #[test]
    fn invalidation_stops_at_evidence() {
        let mut g = chain();
        let s = invalidate_downstream(&mut g, "PROP-001").unwrap();
        assert_eq!(s.into_iter().collect::<Vec<_>>(), ["CEX-001", "RES-001"]);
        assert!(g.node("RES-001").unwrap().stale);
        assert!(!g.node("REQ-001").unwrap().stale);
        assert!(invalidate_downstream(&mut g, "REQ-001").is_err());
    }

    #[test]
    fn paths() {
        let g = chain();
        assert_eq!(trace_path(&g, "REQ-001", "REQ-001").unwrap(), ["REQ-001"]);
        assert_eq!(
            trace_path(&g, "RES-001", "CHUNK-001").unwrap(),
            ["RES-001", "PROP-001", "REQ-001", "CHUNK-001"]
        );
        let g2 = build_graph(&[row("A", "property"), row("B", "property")], &[]).unwrap();
        assert!(trace_path(&g2, "A", "B").is_none());
    }
}
