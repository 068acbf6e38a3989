// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::types::*;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KindDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub changed: Vec<String>,
}

impl KindDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatusTransition {
    pub prop_id: String,
    pub from: Option<FormalStatus>,
    pub to: Option<FormalStatus>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunDiff {
    /// Keyed by artifact kind; kinds without differences are omitted.
    pub kinds: BTreeMap<String, KindDiff>,
    pub transitions: Vec<StatusTransition>,
}

impl RunDiff {
    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty() && self.transitions.is_empty()
    }
}

fn keyed<T: Serialize>(items: &[T], key: impl Fn(&T) -> String) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    for it in items {
        let base = key(it);
        let mut k = base.clone();
        let mut n = 1;
        while out.contains_key(&k) {
            n += 1;
            k = format!("{base}#{n}");
        }
        out.insert(k, serde_json::to_value(it).expect("artifact serializes"));
    }
    out
}

fn compare(a: &BTreeMap<String, Value>, b: &BTreeMap<String, Value>) -> KindDiff {
    let mut d = KindDiff::default();
    for (k, v) in a {
        match b.get(k) {
            None => d.removed.push(k.clone()),
            Some(w) if w != v => d.changed.push(k.clone()),
            _ => {}
        }
    }
    d.added = b.keys().filter(|k| !a.contains_key(*k)).cloned().collect();
    d
}

/// Per-kind id differences between two runs, plus the properties whose
/// current verdict changed.
pub fn diff_runs(a: &RunBundle, b: &RunBundle) -> RunDiff {
    let mut out = RunDiff::default();
    let mut kind = |k: ArtifactKind, x: BTreeMap<String, Value>, y: BTreeMap<String, Value>| {
        let d = compare(&x, &y);
        if !d.is_empty() {
            out.kinds.insert(k.key().to_string(), d);
        }
    };
    kind(
        ArtifactKind::SpecChunks,
        keyed(a.chunks(), |c| c.chunk_id.clone()),
        keyed(b.chunks(), |c| c.chunk_id.clone()),
    );
    kind(
        ArtifactKind::Requirements,
        keyed(a.reqs(), |r| r.req_id.clone()),
        keyed(b.reqs(), |r| r.req_id.clone()),
    );
    kind(
        ArtifactKind::TestPlan,
        keyed(a.plan(), |t| t.req_id.clone()),
        keyed(b.plan(), |t| t.req_id.clone()),
    );
    let dm = |x: &RunBundle| keyed(x.design_model.as_slice(), |_| "design_model".to_string());
    kind(ArtifactKind::DesignModel, dm(a), dm(b));
    kind(
        ArtifactKind::Properties,
        keyed(a.props(), |p| p.prop_id.clone()),
        keyed(b.props(), |p| p.prop_id.clone()),
    );
    let link = |l: &TraceLink| format!("{} {} {}", l.src_id, l.link_kind, l.dst_id);
    kind(ArtifactKind::TraceLinks, keyed(a.links(), link), keyed(b.links(), link));
    kind(
        ArtifactKind::FormalResults,
        keyed(a.results(), |r| r.result_id.clone()),
        keyed(b.results(), |r| r.result_id.clone()),
    );
    kind(
        ArtifactKind::CexCases,
        keyed(a.cexes(), |c| c.cex_id.clone()),
        keyed(b.cexes(), |c| c.cex_id.clone()),
    );
    kind(
        ArtifactKind::CoverageMetrics,
        keyed(a.coverage(), |c| c.cov_id.clone()),
        keyed(b.coverage(), |c| c.cov_id.clone()),
    );

    let (ra, rb) = (a.current_results(), b.current_results());
    let mut ids: Vec<&str> = ra.keys().chain(rb.keys()).copied().collect();
    ids.sort_unstable();
    ids.dedup();
    for id in ids {
        let from = ra.get(id).map(|r| r.status);
        let to = rb.get(id).map(|r| r.status);
        if from != to {
            out.transitions.push(StatusTransition {
                prop_id: id.to_string(),
                from,
                to,
            });
        }
    }
    out
}
