// SPDX-License-Identifier: Apache-2.0

//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod bundle;
pub mod corpus;
pub mod design;
pub mod formal;
pub mod graph;
pub mod wave;

use std::path::PathBuf;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

use std::path::Path;

use kgfv_core::pipeline::{BackendKind, RunConfig};

pub const FROZEN: &str = "2026-01-01T00:00:00Z";

/// Scripted, time-frozen run of one FIFO fixture directory.
pub fn fifo_config(dir: &str, out: &Path) -> RunConfig {
    let d = fixture(dir);
    let rulebook = d.join("rulebook.md");
    RunConfig {
        spec: d.join("spec.md"),
        rtl: vec![d.join("fifo2.v")],
        top: Some("fifo2".into()),
        rulebook: rulebook.is_file().then_some(rulebook),
        out: out.to_path_buf(),
        backend: BackendKind::Scripted,
        script: Some(d.join("script.json")),
        frozen_time: Some(FROZEN.into()),
        ..RunConfig::default()
    }
}

pub fn replay_config(out: &Path) -> RunConfig {
    RunConfig {
        backend: BackendKind::Replay,
        script: None,
        transcript: Some(fixture("fifo/transcript.json")),
        ..fifo_config("fifo", out)
    }
}

/// Every file under `root` with its contents, by relative path.
pub fn tree(root: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
