// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::{AttemptNote, LoopKind, Outcome, PropStatus};
use crate::kg::{neighborhood, Graph, RetrievalBounds, SignalIndex, TaskKind};
use crate::rtl::DesignModel;
use crate::sva::{bind_one, exact_or_suffix, isolated_wrapper, parse_properties, BindError, BindErrorKind, MacroDef};

use super::context::{all_signals, requirement, signal_table};
use super::envelope::{Payload, PromptEnvelope, Section, Shape};
use super::props::{apply_patch, relabel, PropertySet};
use super::{AgentError, AgentRole, Session, MAX_ATTEMPTS};

/// Deterministic repairs tried before any backend call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RepairRule {
    /// Undeclared identifier with a unique signal match: rewrite to the
    /// full hierarchical path.
    R1,
    /// Undeclared macro-style identifier: define a macro aliasing the
    /// unique candidate signal and use it.
    R2,
    /// Undefined macro with a unique candidate signal: add the definition.
    R3,
}

impl fmt::Display for RepairRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyntaxOutput {
    /// Attempts spent in this run, per property.
    pub attempts: BTreeMap<String, u32>,
    /// Rules applied, per property, in application order.
    pub rules: BTreeMap<String, Vec<RepairRule>>,
    pub backend_calls: usize,
    pub fixed: Vec<String>,
    pub disabled: Vec<String>,
    pub passes: u32,
}

/// A compile problem of one property.
#[derive(Debug, Clone)]
enum Issue {
    Parse(String),
    Bind(Vec<BindError>),
}

impl Issue {
    fn describe(&self) -> String {
        match self {
            Issue::Parse(m) => m.clone(),
            Issue::Bind(es) => es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"),
        }
    }
}

/// Compile the set and attribute every problem to its property.
fn diagnose(set: &PropertySet, dm: &DesignModel, idx: &SignalIndex) -> BTreeMap<String, Issue> {
    let lp = set.parse();
    let mut out = BTreeMap::new();
    for b in &lp.broken {
        let msgs: Vec<String> = lp
            .diagnostics
            .errors()
            .filter(|d| d.line >= b.lines.0 && d.line <= b.lines.1)
            .map(|d| format!("{}:{}: {}: {}", b.prop_id, d.line, d.code.as_str(), d.message))
            .collect();
        out.insert(b.prop_id.clone(), Issue::Parse(msgs.join("\n")));
    }
    for p in &lp.file.properties {
        if let Err(e) = bind_one(&lp.file, p, dm, idx) {
            out.insert(p.prop_id.clone(), Issue::Bind(e.items));
        }
    }
    out.retain(|id, _| set.record(id).is_some_and(|r| r.status == PropStatus::Active));
    out
}

fn edit1(a: &str, b: &str) -> bool {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    if a.len().abs_diff(b.len()) > 1 || a == b {
        return false;
    }
    let (s, l) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    let p = s.iter().zip(l.iter()).take_while(|(x, y)| x == y).count();
    if s.len() == l.len() {
        s[p + 1..] == l[p + 1..]
    } else {
        s[p..] == l[p + 1..]
    }
}

fn unique(v: Vec<String>) -> Option<String> {
    match v.as_slice() {
        [one] => Some(one.clone()),
        _ => None,
    }
}

/// R1 candidate: drop leading scope tokens until the rest resolves
/// uniquely, then try a case-insensitive match, then a leaf name one edit
/// away. Each tier must give exactly one path.
fn r1_candidate(dm: &DesignModel, idx: &SignalIndex, mention: &str) -> Option<String> {
    let toks: Vec<&str> = mention.split('.').collect();
    for k in 1..toks.len() {
        if let Some(p) = unique(exact_or_suffix(dm, idx, &toks[k..].join("."))) {
            return Some(p);
        }
    }
    let leaf = *toks.last()?;
    let paths: Vec<&str> = idx.paths().collect();
    let by_leaf = |pred: &dyn Fn(&str) -> bool| -> Option<String> {
        let hits: Vec<String> = paths
            .iter()
            .filter(|p| pred(p.rsplit('.').next().unwrap_or(p)))
            .map(|p| p.to_string())
            .collect();
        unique(hits)
    };
    by_leaf(&|l| l.eq_ignore_ascii_case(leaf) && l != leaf).or_else(|| by_leaf(&|l| edit1(l, leaf)))
}

fn macro_style(name: &str) -> bool {
    name.chars().any(|c| c.is_ascii_uppercase())
        && name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

/// Rewrite whole identifier tokens equal to `from`, leaving macro uses,
/// system functions and the statement label alone.
fn replace_ident(text: &str, from: &str, to: &str) -> (String, usize) {
    let b = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut n = 0;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'.') {
                i += 1;
            }
            let word = &text[start..i];
            let prev = if start > 0 { b[start - 1] } else { b' ' };
            let label = text[..start].trim().is_empty();
            if word == from && prev != b'`' && prev != b'$' && prev != b'\'' && !label {
                out.push_str(to);
                n += 1;
            } else {
                out.push_str(word);
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'\'' || b[i] == b'_') {
                i += 1;
            }
            out.push_str(&text[start..i]);
        } else {
            let ch = text[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    (out, n)
}

struct RuleResult {
    text: String,
    macros: Vec<MacroDef>,
    applied: Vec<(RepairRule, String)>,
    remaining: Vec<BindError>,
}

fn apply_rules(text: &str, errors: &[BindError], set: &PropertySet, dm: &DesignModel, idx: &SignalIndex) -> RuleResult {
    let mut r = RuleResult {
        text: text.to_string(),
        macros: Vec::new(),
        applied: Vec::new(),
        remaining: Vec::new(),
    };
    let known = |r: &RuleResult, name: &str| set.macros.iter().chain(&r.macros).any(|m| m.name == name);
    for e in errors {
        let id = e.identifier.as_str();
        let done = match e.kind {
            BindErrorKind::UndeclaredIdentifier if !id.is_empty() && macro_style(id) && !id.contains('.') => {
                match unique(exact_or_suffix(dm, idx, &id.to_ascii_lowercase())) {
                    Some(path) if !known(&r, id) || set.header().macro_body(id) == Some(path.as_str()) => {
                        let (t, n) = replace_ident(&r.text, id, &format!("`{id}"));
                        if n > 0 {
                            r.text = t;
                            if !known(&r, id) {
                                r.macros.push(MacroDef { name: id.to_string(), body: path.clone() });
                            }
                            r.applied.push((RepairRule::R2, format!("R2: `define {id} {path}")));
                        }
                        n > 0
                    }
                    _ => false,
                }
            }
            BindErrorKind::UndeclaredIdentifier if !id.is_empty() => match r1_candidate(dm, idx, id) {
                Some(path) => {
                    let (t, n) = replace_ident(&r.text, id, &path);
                    if n > 0 {
                        r.text = t;
                        r.applied.push((RepairRule::R1, format!("R1: {id} -> {path}")));
                    }
                    n > 0
                }
                None => false,
            },
            // defined by a repair earlier in this pass
            BindErrorKind::UndefinedMacro if set.macros.iter().any(|m| m.name == id) => {
                r.applied.push((RepairRule::R3, format!("R3: `{id} already defined")));
                true
            }
            BindErrorKind::UndefinedMacro if !known(&r, id) => {
                let lower = id.to_ascii_lowercase();
                let cand = unique(exact_or_suffix(dm, idx, &lower)).or_else(|| r1_candidate(dm, idx, &lower));
                match cand {
                    Some(path) => {
                        r.macros.push(MacroDef { name: id.to_string(), body: path.clone() });
                        r.applied.push((RepairRule::R3, format!("R3: `define {id} {path}")));
                        true
                    }
                    None => false,
                }
            }
            _ => false,
        };
        if !done {
            r.remaining.push(e.clone());
        }
    }
    r
}

/// Check a candidate alone, with the set's macros plus `extra`. Returns
/// the canonical statement text.
fn validate_isolated(set: &PropertySet, extra: &[MacroDef], prop_id: &str, text: &str, dm: &DesignModel, idx: &SignalIndex) -> Result<String, String> {
    let mut header = set.header();
    header.macros.extend(extra.iter().cloned());
    let wrapper = isolated_wrapper(&header, &relabel(text, prop_id));
    let f = parse_properties(&wrapper).map_err(|d| d.render("candidate"))?;
    let [p] = f.properties.as_slice() else {
        return Err(format!("expected one property, found {}", f.properties.len()));
    };
    bind_one(&f, p, dm, idx).map_err(|e| e.to_string())?;
    Ok(p.render())
}

/// Repair compile errors until nothing changes: deterministic rules
/// first, then the fixer backend, each candidate validated in isolation.
pub fn run_syntax_loop(
    s: &mut Session,
    set: &mut PropertySet,
    dm: &DesignModel,
    g: &Graph,
    bounds: RetrievalBounds,
) -> Result<SyntaxOutput, AgentError> {
    let idx = SignalIndex::from_design(dm);
    let calls_before = s.calls();
    let mut out = SyntaxOutput::default();
    loop {
        let issues = diagnose(set, dm, &idx);
        let pending: Vec<(String, Issue)> = issues
            .into_iter()
            .filter(|(id, _)| set.record(id).is_some_and(|r| (r.attempts(LoopKind::Syntax) as u32) < MAX_ATTEMPTS))
            .collect();
        if pending.is_empty() {
            break;
        }
        out.passes += 1;
        for (id, issue) in pending {
            let rec = set.record(&id).expect("diagnosed property exists");
            let n = rec.attempts(LoopKind::Syntax) as u32 + 1;
            let diagnosis = issue.describe();
            let rules = match &issue {
                Issue::Bind(es) => apply_rules(&rec.sva_text, es, set, dm, &idx),
                Issue::Parse(_) => RuleResult {
                    text: rec.sva_text.clone(),
                    macros: Vec::new(),
                    applied: Vec::new(),
                    remaining: Vec::new(),
                },
            };
            let needs_backend = matches!(issue, Issue::Parse(_)) || !rules.remaining.is_empty();
            let mut summary: Vec<String> = rules.applied.iter().map(|(_, s)| s.clone()).collect();
            out.rules.entry(id.clone()).or_default().extend(rules.applied.iter().map(|(r, _)| *r));
            let mut candidate = Ok(rules.text.clone());
            if needs_backend {
                let left = match &issue {
                    Issue::Parse(m) => m.clone(),
                    Issue::Bind(_) => rules.remaining.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"),
                };
                let signals = match g.node(&id) {
                    Some(_) => signal_table(g, &neighborhood(g, &id, TaskKind::SyntaxRepair, bounds)?),
                    None => all_signals(g),
                };
                let env = PromptEnvelope::new(AgentRole::SyntaxFixer, format!("syntax/{id}/attempt-{n}"), Shape::CodePatch)
                    .with(Section::Requirement, requirement(g, &rec.req_ids))
                    .with(Section::SignalTable, signals)
                    .with(Section::PriorCode, rules.text.as_str())
                    .with(Section::Diagnostics, left);
                candidate = match s.try_ask(env) {
                    Ok(r) => match r.payload {
                        Payload::CodePatch(p) => {
                            summary.push("syntax_fixer patch".into());
                            apply_patch(&rules.text, &p).map_err(|e| format!("patch does not apply: {e}"))
                        }
                        _ => unreachable!("code_patch envelope"),
                    },
                    Err(e @ (AgentError::Shape { .. } | AgentError::NoRule { .. })) => Err(format!("fixer response rejected: {e}")),
                    Err(e) => return Err(e),
                };
            }
            let checked = candidate.and_then(|t| validate_isolated(set, &rules.macros, &id, &t, dm, &idx));
            *out.attempts.entry(id.clone()).or_default() += 1;
            let rec = set.record_mut(&id).expect("exists");
            match checked {
                Ok(text) => {
                    rec.sva_text = text;
                    rec.attempt_history.push(AttemptNote {
                        loop_kind: LoopKind::Syntax,
                        attempt_no: n,
                        diagnosis,
                        patch_summary: summary.join("; "),
                        outcome: Outcome::Fixed,
                    });
                    for m in rules.macros {
                        set.add_macro(m);
                    }
                    out.fixed.push(id.clone());
                }
                Err(why) => {
                    let last = n >= MAX_ATTEMPTS;
                    summary.push(why);
                    rec.attempt_history.push(AttemptNote {
                        loop_kind: LoopKind::Syntax,
                        attempt_no: n,
                        diagnosis,
                        patch_summary: summary.join("; "),
                        outcome: if last { Outcome::Disabled } else { Outcome::Retry },
                    });
                    if last {
                        rec.status = PropStatus::Disabled;
                        out.disabled.push(id.clone());
                    }
                }
            }
        }
    }
    set.assemble();
    out.backend_calls = s.calls() - calls_before;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edit() {
        assert!(edit1("wr_en", "wr_enn"));
        assert!(edit1("wr_en", "wr_em"));
        assert!(edit1("wr_en", "w_en"));
        assert!(!edit1("wr_en", "wr_en"));
        assert!(!edit1("wr_en", "rd_em"));
    }

    #[test]
    fn ident_replacement_skips_labels_and_macros() {
        let (t, n) = replace_ident("FULL: assert property (FULL |-> `FULL && $past(FULL));", "FULL", "x.full");
        assert_eq!(t, "FULL: assert property (x.full |-> `FULL && $past(x.full));");
        assert_eq!(n, 2);
    }
}
