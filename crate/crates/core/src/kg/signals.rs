// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use crate::rtl::DesignModel;

/// Maps every dotted suffix of a hierarchical signal path to the full paths
/// that end with it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignalIndex {
    entries: BTreeMap<Vec<String>, BTreeSet<String>>,
    widths: BTreeMap<String, u32>,
}

impl SignalIndex {
    pub fn from_design(m: &DesignModel) -> SignalIndex {
        SignalIndex::from_paths(m.hierarchy.iter().map(|h| (h.path.clone(), h.width)))
    }

    pub fn from_paths(paths: impl IntoIterator<Item = (String, u32)>) -> SignalIndex {
        let mut idx = SignalIndex::default();
        for (p, w) in paths {
            idx.insert(&p, w);
        }
        idx
    }

    pub fn insert(&mut self, path: &str, width: u32) {
        let toks: Vec<String> = path.split('.').map(str::to_string).collect();
        for i in 0..toks.len() {
            self.entries.entry(toks[i..].to_vec()).or_default().insert(path.to_string());
        }
        self.widths.insert(path.to_string(), width);
    }

    pub fn width(&self, path: &str) -> Option<u32> {
        self.widths.get(path).copied()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.widths.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    /// Full paths whose trailing tokens equal the mention's tokens, sorted.
    pub fn resolve(&self, mention: &str) -> Vec<String> {
        let toks: Vec<String> = mention.trim().split('.').map(str::to_string).collect();
        self.entries
            .get(&toks)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }
}

pub fn resolve_signal(idx: &SignalIndex, mention: &str) -> Vec<String> {
    idx.resolve(mention)
}
