// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::ir::{AttemptNote, PropStatus, PropertyRecord, RunBundle};
use crate::kg::SignalIndex;
use crate::rtl::DesignModel;
use crate::sva::{bind_one, id_to_label, parse_lenient, BoundProperty, LenientParse, MacroDef, PropKind, PropertyFile, HEADER};

/// Name of the assembled assertion file inside a run's auxiliary files.
pub const PROPERTY_FILE: &str = "sva/properties.sva";

const DISABLED_PREFIX: &str = "// disabled ";

/// The working set of properties: shared macros and clocking plus one
/// record per property. The assembled file is derived from it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropertySet {
    pub macros: Vec<MacroDef>,
    pub clocking: Option<String>,
    pub records: Vec<PropertyRecord>,
}

impl PropertySet {
    pub fn from_bundle(b: &RunBundle) -> PropertySet {
        let (macros, clocking) = match b.files.get(PROPERTY_FILE) {
            Some(text) => {
                let lp = parse_lenient(text);
                (lp.file.macros, lp.file.clocking)
            }
            None => (Vec::new(), None),
        };
        PropertySet {
            macros,
            clocking,
            records: b.props().to_vec(),
        }
    }

    /// Assemble and write records and file text into the bundle.
    pub fn store(&mut self, b: &mut RunBundle) {
        let text = self.assemble();
        b.properties = Some(self.records.clone());
        b.files.insert(PROPERTY_FILE.to_string(), text);
    }

    fn render(&self) -> (String, Vec<(u32, u32)>) {
        let mut lines: Vec<String> = vec![HEADER.to_string()];
        if !self.macros.is_empty() {
            lines.push(String::new());
            for m in &self.macros {
                lines.push(format!("`define {} {}", m.name, m.body));
            }
        }
        if let Some(c) = &self.clocking {
            lines.push(String::new());
            lines.push(format!("default clocking @(posedge {c}); endclocking"));
        }
        if !self.records.is_empty() {
            lines.push(String::new());
        }
        let mut spans = Vec::new();
        for r in &self.records {
            let first = lines.len() as u32 + 1;
            match r.status {
                PropStatus::Active => lines.extend(r.sva_text.trim().lines().map(str::to_string)),
                PropStatus::Disabled => {
                    let flat = r.sva_text.split_whitespace().collect::<Vec<_>>().join(" ");
                    lines.push(format!("{DISABLED_PREFIX}{flat}"));
                }
            }
            spans.push((first, lines.len() as u32));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        (out, spans)
    }

    /// Canonical file text; records are sorted by id and their line spans
    /// refreshed.
    pub fn assemble(&mut self) -> String {
        self.records.sort_by(|a, b| a.prop_id.cmp(&b.prop_id));
        let (text, spans) = self.render();
        for (r, s) in self.records.iter_mut().zip(spans) {
            r.line_span = s;
        }
        text
    }

    pub fn text(&self) -> String {
        let mut c = self.clone();
        c.assemble()
    }

    pub fn parse(&self) -> LenientParse {
        parse_lenient(&self.text())
    }

    /// Macros and clocking only, for isolated checks.
    pub fn header(&self) -> PropertyFile {
        PropertyFile {
            macros: self.macros.clone(),
            clocking: self.clocking.clone(),
            ..PropertyFile::default()
        }
    }

    pub fn record(&self, id: &str) -> Option<&PropertyRecord> {
        self.records.iter().find(|r| r.prop_id == id)
    }

    pub fn record_mut(&mut self, id: &str) -> Option<&mut PropertyRecord> {
        self.records.iter_mut().find(|r| r.prop_id == id)
    }

    pub fn next_id(&self) -> String {
        let n = self
            .records
            .iter()
            .filter_map(|r| r.prop_id.strip_prefix("PROP-")?.parse::<u32>().ok())
            .max()
            .unwrap_or(0);
        format!("PROP-{:03}", n + 1)
    }

    pub fn add_macro(&mut self, m: MacroDef) -> bool {
        if self.macros.iter().any(|x| x.name == m.name) {
            return false;
        }
        self.macros.push(m);
        true
    }

    /// Split a property block into new records. Statements keep their
    /// order of appearance and are relabelled with fresh ids; macros and a
    /// default clock declared in the block are merged in.
    pub fn add_block(&mut self, block: &str, req_ids: &[String], status: PropStatus, notes: &[AttemptNote]) -> Vec<String> {
        let lp = parse_lenient(block);
        for m in lp.file.macros.iter().cloned() {
            self.add_macro(m);
        }
        if self.clocking.is_none() {
            self.clocking = lp.file.clocking.clone();
        }
        let mut stmts: Vec<(u32, Option<PropKind>, Result<crate::sva::PropertyDecl, String>)> = Vec::new();
        for p in &lp.file.properties {
            stmts.push((p.lines.0, Some(p.kind), Ok(p.clone())));
        }
        for b in lp.broken.iter().filter(|b| b.text.contains("property")) {
            stmts.push((b.lines.0, b.kind, Err(b.text.clone())));
        }
        stmts.sort_by_key(|s| s.0);
        let mut ids = Vec::new();
        for (_, kind, s) in stmts {
            let id = self.next_id();
            let text = match s {
                Ok(mut p) => {
                    p.prop_id = id.clone();
                    p.render()
                }
                Err(raw) => relabel(&raw, &id),
            };
            self.records.push(PropertyRecord {
                prop_id: id.clone(),
                req_ids: req_ids.to_vec(),
                kind: kind.unwrap_or(PropKind::Assertion),
                sva_text: text,
                line_span: (0, 0),
                status,
                attempt_history: notes.to_vec(),
            });
            ids.push(id);
        }
        self.assemble();
        ids
    }

    /// Bind every active property. Failures are reported per property id,
    /// including statements that do not parse.
    pub fn bind_active(&self, dm: &DesignModel, idx: &SignalIndex) -> (Vec<BoundProperty>, BTreeMap<String, String>) {
        let lp = self.parse();
        let mut errors: BTreeMap<String, String> = BTreeMap::new();
        for b in &lp.broken {
            let msgs: Vec<String> = lp
                .diagnostics
                .errors()
                .filter(|d| d.line >= b.lines.0 && d.line <= b.lines.1)
                .map(|d| format!("{}: {}", d.code.as_str(), d.message))
                .collect();
            errors.insert(b.prop_id.clone(), msgs.join("\n"));
        }
        let mut bound = Vec::new();
        for p in &lp.file.properties {
            if self.record(&p.prop_id).is_none_or(|r| r.status != PropStatus::Active) {
                continue;
            }
            match bind_one(&lp.file, p, dm, idx) {
                Ok(b) => bound.push(b),
                Err(e) => {
                    errors.insert(p.prop_id.clone(), e.to_string());
                }
            }
        }
        (bound, errors)
    }
}

/// Apply a unified diff to a property's text.
pub(crate) fn apply_patch(text: &str, patch: &str) -> Result<String, String> {
    let p = diffy::Patch::from_str(patch).map_err(|e| e.to_string())?;
    let base = format!("{}\n", text.trim_end());
    diffy::apply(&base, &p).map(|t| t.trim().to_string()).map_err(|e| e.to_string())
}

/// Replace or add the statement label.
pub fn relabel(text: &str, prop_id: &str) -> String {
    let label = id_to_label(prop_id);
    let t = text.trim();
    if let Some((head, rest)) = t.split_once(':') {
        let head = head.trim();
        if !head.is_empty() && head.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return format!("{label}:{rest}");
        }
    }
    format!("{label}: {t}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_ids_follow_appearance_order() {
        let mut s = PropertySet::default();
        let block = "`define FULL (count == 2)\ndefault clocking @(posedge clk); endclocking\n\
                     A_9: assert property (a |=> b);\nbad: assert property (a |=> );\nC_1: cover property (`FULL);\n";
        let ids = s.add_block(block, &["REQ-001".into()], PropStatus::Active, &[]);
        assert_eq!(ids, ["PROP-001", "PROP-002", "PROP-003"]);
        assert_eq!(s.clocking.as_deref(), Some("clk"));
        assert_eq!(s.records[1].sva_text, "PROP_002: assert property (a |=> );");
        assert_eq!(s.records[2].kind, PropKind::Cover);
        let text = s.assemble();
        assert_eq!(
            text,
            "// kgfv assertion file\n\n`define FULL (count == 2)\n\n\
             default clocking @(posedge clk); endclocking\n\n\
             PROP_001: assert property (a |=> b);\n\
             PROP_002: assert property (a |=> );\n\
             PROP_003: cover property (`FULL);\n"
        );
        assert_eq!(s.records[2].line_span, (9, 9));
        let lp = parse_lenient(&text);
        assert_eq!(lp.broken.len(), 1);
        assert_eq!(lp.file.line_map["PROP-003"], (9, 9));
    }

    #[test]
    fn disabled_records_are_commented_out() {
        let mut s = PropertySet::default();
        s.add_block("P_1: assert property (@(posedge clk) a);", &[], PropStatus::Disabled, &[]);
        let text = s.assemble();
        assert!(text.ends_with("// disabled PROP_001: assert property (@(posedge clk) a);\n"));
        assert!(parse_lenient(&text).file.properties.is_empty());
        let mut b = RunBundle::default();
        s.store(&mut b);
        assert_eq!(PropertySet::from_bundle(&b), s);
    }
}
