// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::engine::{check, CheckConfig};
use crate::ir::{AttemptNote, CexCase, FormalStatus, LoopKind, Outcome, PropStatus, RootCause, RunBundle};
use crate::kg::{invalidate_downstream, Graph, SignalIndex};
use crate::rtl::{DesignModel, NetModel};
use crate::sva::{bind_one, id_to_label, isolated_wrapper, parse_properties, BoundProperty, PropKind, PropertyDecl};
use crate::vcd::{failure_window, parse_vcd, WindowSummary};

use super::context::requirement;
use super::envelope::{Payload, PromptEnvelope, Section, Shape};
use super::props::{apply_patch, relabel, PropertySet};
use super::{AgentError, AgentRole, Session, MAX_ATTEMPTS};

#[derive(Debug, Clone)]
pub struct CexConfig {
    /// Budgets for isolated re-checks; assumptions come from the set.
    pub engine: CheckConfig,
    /// Cycles before the failure included in the waveform window.
    pub window_pre: u64,
}

impl Default for CexConfig {
    fn default() -> Self {
        CexConfig {
            engine: CheckConfig::default(),
            window_pre: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CexOutput {
    /// Cases opened by this pass, in property order.
    pub cases: Vec<CexCase>,
    /// Graph nodes marked stale by accepted patches.
    pub invalidated: BTreeSet<String>,
    /// Properties whose patch re-checked clean.
    pub corrected: Vec<String>,
    pub rtl_bugs: Vec<String>,
    /// Properties that used up their attempts.
    pub manual: Vec<String>,
    /// Assumptions added by fixes.
    pub new_props: Vec<String>,
    pub attempts: BTreeMap<String, u32>,
}

pub const MISSING_ARTIFACT: &str = "missing_artifact";

fn next_cex_id(taken: &BTreeSet<String>) -> String {
    let n = taken
        .iter()
        .filter_map(|c| c.strip_prefix("CEX-")?.parse::<u32>().ok())
        .max()
        .unwrap_or(0);
    format!("CEX-{:03}", n + 1)
}

fn is_reset(name: &str) -> Option<u64> {
    let leaf = name.rsplit('.').next().unwrap_or(name).to_ascii_lowercase();
    if !(leaf.contains("rst") || leaf.contains("reset")) {
        return None;
    }
    // active-low names end in _n or _b
    Some(if leaf.ends_with("_n") || leaf.ends_with("_b") { 0 } else { 1 })
}

fn render_window(w: &WindowSummary) -> String {
    let mut s = format!("failure time: {}\n", w.center_time);
    for e in &w.window {
        let _ = writeln!(s, "#{} {} {} -> {}", e.time, e.signal, e.old.as_deref().unwrap_or("-"), e.new);
    }
    if !w.missing.is_empty() {
        let _ = writeln!(s, "not in waveform: {}", w.missing.join(", "));
    }
    s
}

/// Lines of the RTL source that mention any of the signals' leaf names.
fn rtl_excerpt(src: &str, signals: &[String]) -> String {
    let leaves: BTreeSet<&str> = signals.iter().map(|s| s.rsplit('.').next().unwrap_or(s)).collect();
    src.lines()
        .enumerate()
        .filter(|(_, l)| {
            l.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .any(|w| leaves.contains(w))
        })
        .map(|(i, l)| format!("{:>4}: {}", i + 1, l.trim_end()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn bound_signals(b: &BoundProperty) -> Vec<String> {
    let mut out = BTreeSet::new();
    for e in b.ast.exprs() {
        for (p, _) in e.idents() {
            out.insert(p);
        }
    }
    out.into_iter().collect()
}

/// A patched statement plus any assumptions it brings along, parsed and
/// bound against the set's header.
struct Candidate {
    main: PropertyDecl,
    bound: BoundProperty,
    extra: Vec<(PropertyDecl, BoundProperty)>,
}

fn compile_candidate(set: &PropertySet, prop_id: &str, text: &str, dm: &DesignModel, idx: &SignalIndex) -> Result<Candidate, String> {
    let label = id_to_label(prop_id);
    let mut lines: Vec<String> = text.lines().map(str::to_string).filter(|l| !l.trim().is_empty()).collect();
    if let Some(first) = lines.iter_mut().find(|l| !l.trim_start().starts_with("//")) {
        if !first.trim_start().starts_with(&format!("{label}:")) && !first.contains("assume") {
            *first = relabel(first, prop_id);
        }
    }
    let wrapper = isolated_wrapper(&set.header(), &lines.join("\n"));
    let f = parse_properties(&wrapper).map_err(|d| d.render("candidate"))?;
    let mut main = None;
    let mut extra = Vec::new();
    for (i, p) in f.properties.iter().enumerate() {
        let b = bind_one(&f, p, dm, idx).map_err(|e| e.to_string())?;
        if p.prop_id == prop_id {
            main = Some((p.clone(), b));
        } else if p.kind == PropKind::Assumption {
            extra.push((p.clone(), b));
        } else {
            return Err(format!("statement {} is neither the patched property nor an assumption", i + 1));
        }
    }
    let (main, bound) = main.ok_or_else(|| format!("patched text lost property {label}"))?;
    Ok(Candidate { main, bound, extra })
}

/// Classify and repair every current counterexample that has no case yet.
#[allow(clippy::too_many_arguments)]
pub fn run_cex_loop(
    s: &mut Session,
    set: &mut PropertySet,
    b: &RunBundle,
    g: &mut Graph,
    net: &NetModel,
    dm: &DesignModel,
    rtl_source: &str,
    cfg: &CexConfig,
) -> Result<CexOutput, AgentError> {
    let idx = SignalIndex::from_design(dm);
    let mut out = CexOutput::default();
    let handled: BTreeSet<&str> = b.cexes().iter().filter_map(|c| c.result_id.as_deref()).collect();
    let mut taken: BTreeSet<String> = b.cexes().iter().map(|c| c.cex_id.clone()).collect();
    let failing: Vec<_> = b
        .current_results()
        .into_values()
        .filter(|r| r.status == FormalStatus::Cex && !handled.contains(r.result_id.as_str()))
        .cloned()
        .collect();

    for r in failing {
        let pid = r.prop_id.clone();
        let Some(rec) = set.record(&pid).cloned() else { continue };
        if rec.status != PropStatus::Active || rec.attempts(LoopKind::Cex) as u32 >= MAX_ATTEMPTS {
            continue;
        }
        let cex_id = next_cex_id(&taken);
        taken.insert(cex_id.clone());
        let mut case = CexCase {
            cex_id,
            prop_id: pid.clone(),
            result_id: Some(r.result_id.clone()),
            vcd_path: r.artifact_path.clone().unwrap_or_default(),
            failure_time: 0,
            failure_line: rec.line_span.0,
            attempts: Vec::new(),
            root_cause: None,
            note: None,
        };
        let db = r.artifact_path.as_ref().and_then(|p| b.files.get(p)).map(|t| parse_vcd(t.as_bytes()));
        let db = match db {
            Some(Ok(db)) => db,
            Some(Err(e)) => {
                case.note = Some(format!("{MISSING_ARTIFACT}: unreadable waveform: {e}"));
                out.cases.push(case);
                continue;
            }
            None => {
                case.note = Some(MISSING_ARTIFACT.to_string());
                out.cases.push(case);
                continue;
            }
        };
        let t = db.end_time();
        case.failure_time = t;

        let current = compile_candidate(set, &pid, &rec.sva_text, dm, &idx).map_err(AgentError::Config)?;
        let mut signals = bound_signals(&current.bound);
        signals.extend(net.inputs.iter().filter(|v| is_reset(&v.name).is_some()).map(|v| v.name.clone()));
        signals.sort();
        signals.dedup();
        let window = failure_window(&db, t, &signals, cfg.window_pre);

        let (bound_all, _) = set.bind_active(dm, &idx);
        let assumptions: Vec<BoundProperty> = bound_all.into_iter().filter(|p| p.kind == PropKind::Assumption).collect();
        let lo = t.saturating_sub(cfg.window_pre);
        let reset_seen = net.inputs.iter().any(|v| match is_reset(&v.name) {
            Some(active) => (lo..=t).any(|c| {
                db.value_at(&v.name, c)
                    .and_then(|x| u64::from_str_radix(x, 2).ok())
                    .is_some_and(|x| x == active)
            }),
            None => false,
        });
        let unconstrained: Vec<&str> = net
            .inputs
            .iter()
            .map(|v| v.name.as_str())
            .filter(|n| is_reset(n).is_none() && !assumptions.iter().any(|a| bound_signals(a).iter().any(|s| s == n)))
            .filter(|n| window.window.iter().any(|e| e.signal == *n && e.time > lo))
            .collect();
        let facts = format!(
            "failure time: {t}\ndisable clause: {}\nreset asserted in window: {}\nassumptions: {}\nunconstrained input toggled: {}",
            if current.main.ast.disable.is_some() { "present" } else { "none" },
            if reset_seen { "yes" } else { "no" },
            if assumptions.is_empty() { "none".to_string() } else { assumptions.len().to_string() },
            if unconstrained.is_empty() { "no".to_string() } else { format!("yes ({})", unconstrained.join(", ")) },
        );
        let step = format!("cex/{pid}/{}", r.result_id);
        let req = requirement(g, &rec.req_ids);
        let wave = render_window(&window);
        let base = |role: AgentRole, step: String, shape: Shape| {
            PromptEnvelope::new(role, step, shape)
                .with(Section::Requirement, req.as_str())
                .with(Section::Waveform, wave.as_str())
        };
        let env = base(AgentRole::SpecAssertionAnalyzer, format!("{step}/classify"), Shape::Analysis)
            .with(Section::PriorCode, rec.sva_text.as_str())
            .with(Section::Diagnostics, facts.as_str())
            .with(Section::Notes, rtl_excerpt(rtl_source, &signals));
        let answer = s.ask(env)?.raw;
        let word = answer
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .find(|w| !w.is_empty())
            .unwrap_or("");
        let cause = RootCause::parse(word).ok_or_else(|| AgentError::Protocol {
            role: AgentRole::SpecAssertionAnalyzer,
            step_id: format!("{step}/classify"),
            source: Box::new(AgentError::Shape {
                shape: Shape::Analysis,
                reason: "answer does not start with a root-cause class".into(),
                raw: answer.clone(),
            }),
        })?;
        case.root_cause = Some(cause);
        if cause == RootCause::RtlBug {
            case.note = Some(format!("documented for RTL correction: {}", answer.trim()));
            out.rtl_bugs.push(pid.clone());
            out.cases.push(case);
            continue;
        }

        let mut last_failure = String::new();
        let mut fixed = false;
        while !fixed && (set.record(&pid).expect("exists").attempts(LoopKind::Cex) as u32) < MAX_ATTEMPTS {
            let rec = set.record(&pid).expect("exists").clone();
            let n = rec.attempts(LoopKind::Cex) as u32 + 1;
            let env = base(AgentRole::CexFixer, format!("{step}/attempt-{n}"), Shape::CodePatch)
                .with(Section::PriorCode, rec.sva_text.as_str())
                .with(Section::Diagnostics, format!("root cause: {}\n{facts}\n{last_failure}", cause.as_str()));
            let outcome: Result<Candidate, String> = match s.try_ask(env) {
                Ok(resp) => match resp.payload {
                    Payload::CodePatch(p) => apply_patch(&rec.sva_text, &p)
                        .map_err(|e| format!("patch does not apply: {e}"))
                        .and_then(|t| compile_candidate(set, &pid, &t, dm, &idx)),
                    _ => unreachable!("code_patch envelope"),
                },
                Err(e @ (AgentError::Shape { .. } | AgentError::NoRule { .. })) => Err(format!("fixer response rejected: {e}")),
                Err(e) => return Err(e),
            };
            let checked = outcome.and_then(|c| {
                let mut ecfg = cfg.engine.clone();
                ecfg.assumptions = assumptions.clone();
                ecfg.assumptions.extend(c.extra.iter().map(|(_, b)| b.clone()));
                let v = check(net, &c.bound, &ecfg).map_err(|e| e.to_string())?;
                match v.status {
                    FormalStatus::Proven | FormalStatus::Bounded => Ok((c, v.status)),
                    other => Err(format!("isolated re-check: {other}")),
                }
            });
            *out.attempts.entry(pid.clone()).or_default() += 1;
            let note = match checked {
                Ok((c, status)) => {
                    fixed = true;
                    let summary = if c.extra.is_empty() {
                        format!("patched; isolated re-check {status}")
                    } else {
                        format!("patched with {} assumption(s); isolated re-check {status}", c.extra.len())
                    };
                    let r = set.record_mut(&pid).expect("exists");
                    r.sva_text = c.main.render();
                    if !c.extra.is_empty() {
                        let block: Vec<String> = c.extra.iter().map(|(d, _)| d.render()).collect();
                        let req_ids = r.req_ids.clone();
                        let ids = set.add_block(&block.join("\n"), &req_ids, PropStatus::Active, &[]);
                        out.new_props.extend(ids);
                        // a new assumption can change every verdict
                        for p in set.records.iter().map(|r| r.prop_id.clone()).collect::<Vec<_>>() {
                            if g.node(&p).is_some() {
                                out.invalidated.extend(invalidate_downstream(g, &p)?);
                            }
                        }
                    }
                    if g.node(&pid).is_some() {
                        out.invalidated.extend(invalidate_downstream(g, &pid)?);
                    }
                    out.corrected.push(pid.clone());
                    AttemptNote {
                        loop_kind: LoopKind::Cex,
                        attempt_no: n,
                        diagnosis: cause.as_str().to_string(),
                        patch_summary: summary,
                        outcome: Outcome::Fixed,
                    }
                }
                Err(why) => {
                    last_failure = format!("previous attempt: {why}");
                    AttemptNote {
                        loop_kind: LoopKind::Cex,
                        attempt_no: n,
                        diagnosis: cause.as_str().to_string(),
                        patch_summary: why,
                        outcome: Outcome::Retry,
                    }
                }
            };
            set.record_mut(&pid).expect("exists").attempt_history.push(note.clone());
            case.attempts.push(note);
        }
        if !fixed {
            case.note = Some("flagged for manual analysis".into());
            out.manual.push(pid.clone());
        }
        out.cases.push(case);
    }
    set.assemble();
    Ok(out)
}
