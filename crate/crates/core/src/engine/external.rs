// SPDX-License-Identifier: Apache-2.0

//! Ingestion of verdicts produced by an external formal tool.
//!
//! Report schema (JSON):
//!
//! ```json
//! {
//!   "tool": "vendor-fv 2.1",
//!   "results": [
//!     { "property": "PROP-001", "status": "proven", "depth": 20,
//!       "runtime_ms": 15, "trace": "cex/p1.vcd", "message": "optional" }
//!   ]
//! }
//! ```
//!
//! `property` and `status` are required; the rest are optional. Status
//! strings are matched case-insensitively through [`EXTERNAL_STATUS_TABLE`].

use serde::Deserialize;

use crate::ir::{make_id, FormalResult, FormalStatus, ValidationReport};

/// Vendor status spellings and the verdict each maps to. Anything else
/// becomes `error` with the original status kept in the message.
pub const EXTERNAL_STATUS_TABLE: &[(&str, FormalStatus)] = &[
    ("proven", FormalStatus::Proven),
    ("proved", FormalStatus::Proven),
    ("pass", FormalStatus::Proven),
    ("passed", FormalStatus::Proven),
    ("cex", FormalStatus::Cex),
    ("fail", FormalStatus::Cex),
    ("failed", FormalStatus::Cex),
    ("falsified", FormalStatus::Cex),
    ("vacuous", FormalStatus::Vacuous),
    ("undetermined", FormalStatus::Bounded),
    ("inconclusive", FormalStatus::Bounded),
    ("bounded", FormalStatus::Bounded),
    ("timeout", FormalStatus::Bounded),
    ("error", FormalStatus::Error),
];

pub fn map_external_status(s: &str) -> Option<FormalStatus> {
    let s = s.trim().to_ascii_lowercase();
    EXTERNAL_STATUS_TABLE.iter().find(|(k, _)| *k == s).map(|(_, v)| *v)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Report {
    #[serde(default)]
    #[allow(dead_code)]
    tool: Option<String>,
    #[serde(default)]
    results: Vec<Entry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    property: String,
    status: String,
    #[serde(default)]
    depth: Option<u32>,
    #[serde(default)]
    runtime_ms: Option<u64>,
    #[serde(default)]
    trace: Option<String>,
    #[serde(default)]
    message: Option<String>,
}

/// Convert an external report into results numbered `RES-001` onwards.
pub fn import_external_results(report: &serde_json::Value) -> Result<Vec<FormalResult>, ValidationReport> {
    let rep: Report = serde_json::from_value(report.clone()).map_err(|e| ValidationReport::parse_error(&e.to_string()))?;
    let mut bad = ValidationReport::default();
    let mut out = Vec::new();
    for (i, e) in rep.results.into_iter().enumerate() {
        if e.property.trim().is_empty() {
            bad.push(format!("results[{i}].property"), "property id must be non-empty");
            continue;
        }
        let (mut status, mut message) = match map_external_status(&e.status) {
            Some(s) => (s, e.message),
            None => (
                FormalStatus::Error,
                Some(match e.message {
                    Some(m) => format!("external status '{}': {m}", e.status),
                    None => format!("external status '{}'", e.status),
                }),
            ),
        };
        if status == FormalStatus::Cex && e.trace.is_none() {
            status = FormalStatus::Error;
            message = Some("counterexample reported without a trace artifact".into());
        }
        out.push(FormalResult {
            result_id: make_id("RES", i + 1),
            prop_id: e.property,
            status,
            proof_depth: e.depth,
            runtime: e.runtime_ms.unwrap_or(0),
            artifact_path: e.trace,
            stage: "external".into(),
            stale: false,
            external: true,
            message,
        });
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(bad)
    }
}
