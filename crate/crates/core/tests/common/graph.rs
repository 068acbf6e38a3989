// SPDX-License-Identifier: Apache-2.0

//! Random knowledge graphs with schema-valid edges, plus reference
//! implementations of retrieval and invalidation that share no code with
//! the library.

use std::collections::{BTreeMap, BTreeSet};

use kgfv_core::ir::{EdgeRow, NodeRow};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub const KINDS: &[(&str, &str)] = &[
    ("spec_chunk", "CHUNK"),
    ("requirement", "REQ"),
    ("property", "PROP"),
    ("formal_result", "RES"),
    ("cex_case", "CEX"),
    ("coverage", "COV"),
    ("module", "mod:m"),
    ("signal", "sig:top.s"),
    ("statement", "S"),
];

/// Allowed (edge kind, source kind, destination kind) triples.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("derives_from", "requirement", "spec_chunk"),
    ("validates", "property", "requirement"),
    ("proves", "formal_result", "property"),
    ("fails", "formal_result", "property"),
    ("covers", "property", "coverage"),
    ("covers", "property", "statement"),
    ("contains", "formal_result", "cex_case"),
    ("contains", "module", "signal"),
    ("contains", "module", "statement"),
    ("contains", "module", "module"),
    ("precedes", "spec_chunk", "spec_chunk"),
    ("mentions", "requirement", "signal"),
    ("mentions", "property", "signal"),
    ("references", "coverage", "statement"),
];

pub struct RandomGraph {
    pub nodes: Vec<NodeRow>,
    pub edges: Vec<EdgeRow>,
}

impl RandomGraph {
    pub fn kind_of(&self) -> BTreeMap<&str, &str> {
        self.nodes.iter().map(|n| (n.id.as_str(), n.kind.as_str())).collect()
    }

    pub fn ids_of(&self, kind: &str) -> Vec<&str> {
        self.nodes.iter().filter(|n| n.kind == kind).map(|n| n.id.as_str()).collect()
    }
}

pub fn gen_graph(rng: &mut StdRng, n_nodes: usize, n_edges: usize) -> RandomGraph {
    let mut nodes = Vec::new();
    let mut by_kind: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for i in 0..n_nodes {
        let (kind, prefix) = KINDS[if i < KINDS.len() { i } else { rng.gen_range(0..KINDS.len()) }];
        let id = if prefix.contains(':') || prefix == "S" {
            format!("{prefix}{i}")
        } else {
            format!("{prefix}-{i:03}")
        };
        let attrs = serde_json::json!({ "stale": false, "n": i, "label": format!("\"{id}\", ok") });
        nodes.push(NodeRow {
            id: id.clone(),
            kind: kind.to_string(),
            run_id: "RUN".into(),
            attributes: attrs.to_string(),
        });
        by_kind.entry(kind).or_default().push(id);
    }
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..n_edges {
        let (kind, s, d) = *SCHEMA.choose(rng).unwrap();
        let (Some(ss), Some(ds)) = (by_kind.get(s), by_kind.get(d)) else { continue };
        let (src, dst) = (ss.choose(rng).unwrap().clone(), ds.choose(rng).unwrap().clone());
        if src == dst || !seen.insert((src.clone(), dst.clone(), kind)) {
            continue;
        }
        edges.push(EdgeRow {
            src,
            dst,
            kind: kind.to_string(),
            run_id: "RUN".into(),
            attributes: "{}".into(),
        });
    }
    RandomGraph { nodes, edges }
}

pub fn admitted(task_generation: bool, kind: &str) -> bool {
    match kind {
        "derives_from" | "validates" | "contains" | "precedes" | "mentions" => true,
        "proves" | "fails" | "covers" | "references" => !task_generation,
        _ => false,
    }
}

/// Hop distances from `anchor` by repeated relaxation over undirected
/// admitted edges, limited to `radius`.
pub fn distances(g: &RandomGraph, anchor: &str, generation: bool, radius: u32) -> BTreeMap<String, u32> {
    let mut dist: BTreeMap<String, u32> = BTreeMap::new();
    dist.insert(anchor.to_string(), 0);
    loop {
        let mut changed = false;
        for e in g.edges.iter().filter(|e| admitted(generation, &e.kind)) {
            for (a, b) in [(&e.src, &e.dst), (&e.dst, &e.src)] {
                if let Some(&da) = dist.get(a.as_str()) {
                    let cand = da + 1;
                    if cand <= radius && dist.get(b.as_str()).is_none_or(|&db| cand < db) {
                        dist.insert(b.clone(), cand);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

/// Expected members under a per-type cap: per kind, the nearest nodes
/// ordered by (hops, id); the anchor always stays.
pub fn capped(g: &RandomGraph, dist: &BTreeMap<String, u32>, cap: Option<usize>) -> (BTreeMap<String, u32>, bool) {
    let kinds = g.kind_of();
    let mut per: BTreeMap<&str, Vec<(u32, &str)>> = BTreeMap::new();
    for (id, &h) in dist {
        per.entry(kinds[id.as_str()]).or_default().push((h, id.as_str()));
    }
    let mut out = BTreeMap::new();
    let mut truncated = false;
    for (_, mut v) in per {
        v.sort();
        for (rank, (h, id)) in v.into_iter().enumerate() {
            if h == 0 || cap.is_none_or(|c| rank < c) {
                out.insert(id.to_string(), h);
            } else {
                truncated = true;
            }
        }
    }
    (out, truncated)
}

/// Evidence records downstream of a property, as a fixed point over the
/// edge list.
pub fn downstream(g: &RandomGraph, prop: &str) -> BTreeSet<String> {
    let kinds = g.kind_of();
    let evidence = |id: &str| matches!(kinds[id], "formal_result" | "cex_case" | "coverage");
    let mut reached: BTreeSet<String> = BTreeSet::from([prop.to_string()]);
    loop {
        let before = reached.len();
        for e in &g.edges {
            let (from, to) = match e.kind.as_str() {
                "proves" | "fails" => (&e.dst, &e.src),
                "covers" => (&e.src, &e.dst),
                "contains" if kinds[e.src.as_str()] == "formal_result" => (&e.src, &e.dst),
                _ => continue,
            };
            if reached.contains(from) && evidence(to) {
                reached.insert(to.clone());
            }
        }
        if reached.len() == before {
            reached.remove(prop);
            return reached;
        }
    }
}
