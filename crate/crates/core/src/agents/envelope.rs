// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AgentError, AgentRole};
use crate::sva::parse_lenient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Analysis,
    CodePatch,
    Verdict,
    PropertyBlock,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Analysis => "analysis",
            Shape::CodePatch => "code_patch",
            Shape::Verdict => "verdict",
            Shape::PropertyBlock => "property_block",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Context sections, declared in rendering order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Requirement,
    SpecFragment,
    SignalTable,
    Rulebook,
    PriorCode,
    Diagnostics,
    Waveform,
    Coverage,
    Notes,
}

impl Section {
    pub fn as_str(self) -> &'static str {
        match self {
            Section::Requirement => "requirement",
            Section::SpecFragment => "spec_fragment",
            Section::SignalTable => "signal_table",
            Section::Rulebook => "rulebook",
            Section::PriorCode => "prior_code",
            Section::Diagnostics => "diagnostics",
            Section::Waveform => "waveform",
            Section::Coverage => "coverage",
            Section::Notes => "notes",
        }
    }
}

/// Sections shortened first when an envelope exceeds its budget.
const TRIM_ORDER: [Section; 9] = [
    Section::Rulebook,
    Section::SpecFragment,
    Section::SignalTable,
    Section::Notes,
    Section::Waveform,
    Section::Coverage,
    Section::Diagnostics,
    Section::PriorCode,
    Section::Requirement,
];

const TRUNCATED: &str = "\n[truncated]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub role: AgentRole,
    pub step_id: String,
    pub sections: BTreeMap<Section, String>,
    pub expected_shape: Shape,
}

impl PromptEnvelope {
    pub fn new(role: AgentRole, step_id: impl Into<String>, expected_shape: Shape) -> Self {
        PromptEnvelope {
            role,
            step_id: step_id.into(),
            sections: BTreeMap::new(),
            expected_shape,
        }
    }

    /// Add a section; blank text is dropped.
    pub fn with(mut self, s: Section, text: impl Into<String>) -> Self {
        let text = text.into();
        if !text.trim().is_empty() {
            self.sections.insert(s, text.trim_end().to_string());
        }
        self
    }

    pub fn section(&self, s: Section) -> Option<&str> {
        self.sections.get(&s).map(String::as_str)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.sections {
            out.push_str("## ");
            out.push_str(k.as_str());
            out.push('\n');
            out.push_str(v);
            out.push_str("\n\n");
        }
        out
    }

    pub fn size(&self) -> usize {
        self.render().len()
    }

    /// Shorten low-priority sections until the rendered context fits.
    pub fn fit(&mut self, budget: usize) {
        for s in TRIM_ORDER {
            let size = self.size();
            if size <= budget {
                return;
            }
            let Some(text) = self.sections.get_mut(&s) else { continue };
            let excess = size - budget;
            let keep = text.len().saturating_sub(excess + TRUNCATED.len());
            let mut cut = keep;
            while !text.is_char_boundary(cut) {
                cut -= 1;
            }
            if cut == 0 {
                self.sections.remove(&s);
            } else {
                text.truncate(cut);
                text.push_str(TRUNCATED);
            }
        }
    }

    /// SHA-256 over role, step, shape and rendered context.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.role.as_str());
        h.update([0]);
        h.update(&self.step_id);
        h.update([0]);
        h.update(self.expected_shape.as_str());
        h.update([0]);
        h.update(self.render());
        format!("{:x}", h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Analysis(String),
    /// Unified diff text.
    CodePatch(String),
    Verdict { approve: bool, reasons: Vec<String> },
    /// Property source with surrounding prose and code fences removed.
    PropertyBlock(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentResponse {
    pub role: AgentRole,
    pub step_id: String,
    pub raw: String,
    pub payload: Payload,
}

/// Contents of the first fenced code block, or the whole text.
fn unfence(raw: &str) -> String {
    let mut inside = false;
    let mut found = false;
    let mut out = Vec::new();
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            if inside {
                break;
            }
            inside = true;
            found = true;
            continue;
        }
        if inside {
            out.push(line);
        }
    }
    if found {
        let mut s = out.join("\n");
        s.push('\n');
        s
    } else {
        raw.to_string()
    }
}

pub fn parse_payload(shape: Shape, raw: &str) -> Result<Payload, AgentError> {
    let bad = |why: &str| AgentError::Shape {
        shape,
        reason: why.to_string(),
        raw: raw.to_string(),
    };
    match shape {
        Shape::Analysis => {
            if raw.trim().is_empty() {
                return Err(bad("empty analysis"));
            }
            Ok(Payload::Analysis(raw.trim().to_string()))
        }
        Shape::CodePatch => {
            let mut text = unfence(raw);
            if !text.ends_with('\n') {
                text.push('\n');
            }
            let patch = diffy::Patch::from_str(&text).map_err(|e| bad(&format!("not a unified diff: {e}")))?;
            if patch.hunks().is_empty() {
                return Err(bad("diff has no hunks"));
            }
            Ok(Payload::CodePatch(text))
        }
        Shape::Verdict => {
            let mut lines = raw.lines().map(str::trim).filter(|l| !l.is_empty());
            let first = lines.next().ok_or_else(|| bad("empty verdict"))?;
            let word = first
                .split(|c: char| !c.is_ascii_alphabetic())
                .next()
                .unwrap_or("")
                .to_ascii_lowercase();
            let approve = match word.as_str() {
                "approve" | "approved" => true,
                "reject" | "rejected" => false,
                _ => return Err(bad("verdict must start with APPROVE or REJECT")),
            };
            let mut reasons: Vec<String> = lines.map(|l| l.trim_start_matches(['-', '*', ' ']).to_string()).collect();
            let rest = first[word.len().min(first.len())..].trim_start_matches([':', ' ', '-']).trim();
            if !rest.is_empty() {
                reasons.insert(0, rest.to_string());
            }
            Ok(Payload::Verdict { approve, reasons })
        }
        Shape::PropertyBlock => {
            let text = unfence(raw);
            let lp = parse_lenient(&text);
            let statements = lp.file.properties.len() + lp.broken.iter().filter(|b| b.text.contains("property")).count();
            if statements == 0 {
                return Err(bad("no property statements"));
            }
            Ok(Payload::PropertyBlock(text.trim().to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_render_in_fixed_order() {
        let a = PromptEnvelope::new(AgentRole::SvaAuthor, "s", Shape::PropertyBlock)
            .with(Section::Diagnostics, "d")
            .with(Section::Requirement, "r");
        let b = PromptEnvelope::new(AgentRole::SvaAuthor, "s", Shape::PropertyBlock)
            .with(Section::Requirement, "r")
            .with(Section::Diagnostics, "d");
        assert_eq!(a.render(), "## requirement\nr\n\n## diagnostics\nd\n\n");
        assert_eq!(a.digest(), b.digest());
        let c = b.clone().with(Section::Notes, "n");
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn fit_trims_low_priority_first() {
        let mut e = PromptEnvelope::new(AgentRole::SvaLead, "s", Shape::Analysis)
            .with(Section::Requirement, "keep me")
            .with(Section::Rulebook, "x".repeat(500));
        e.fit(120);
        assert!(e.size() <= 120, "{}", e.size());
        assert_eq!(e.section(Section::Requirement), Some("keep me"));
        assert!(e.section(Section::Rulebook).unwrap().ends_with("[truncated]"));
    }

    #[test]
    fn payload_shapes() {
        assert!(matches!(
            parse_payload(Shape::Verdict, "REJECT: too weak\n- misses reset").unwrap(),
            Payload::Verdict { approve: false, reasons } if reasons == ["too weak", "misses reset"]
        ));
        assert!(parse_payload(Shape::Verdict, "maybe").is_err());
        let block = "Here you go:\n```systemverilog\nP_1: assert property (@(posedge clk) a);\n```\n";
        assert_eq!(
            parse_payload(Shape::PropertyBlock, block).unwrap(),
            Payload::PropertyBlock("P_1: assert property (@(posedge clk) a);".into())
        );
        assert!(parse_payload(Shape::PropertyBlock, "I cannot help").is_err());
        let diff = "--- a\n+++ b\n@@ -1 +1 @@\n-x\n+y\n";
        assert!(matches!(parse_payload(Shape::CodePatch, diff).unwrap(), Payload::CodePatch(_)));
        match parse_payload(Shape::CodePatch, "no patch") {
            Err(AgentError::Shape { raw, .. }) => assert_eq!(raw, "no patch"),
            other => panic!("{other:?}"),
        }
    }
}
