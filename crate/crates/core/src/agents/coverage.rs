// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::engine::{reachability, CheckConfig};
use crate::ir::{AttemptNote, CoverageMetrics, DeadCode, DeadCodeClass, LinkKind, LoopKind, Outcome, PropStatus, TraceLink};
use crate::kg::{neighborhood, trace_path, Graph, RetrievalBounds, SignalIndex, TaskKind};
use crate::rtl::{DesignModel, NetModel, StatementRef};
use crate::sva::{BoundProperty, PropKind};

use super::context::{requirement, signal_table};
use super::envelope::{Payload, PromptEnvelope, Section, Shape};
use super::props::PropertySet;
use super::{AgentError, AgentRole, Session};

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub statement: String,
    pub module: String,
    pub fallback_arm: bool,
    /// Assumptions whose removal makes the statement reachable.
    pub blocking: Vec<String>,
    pub classification: DeadCodeClass,
    /// Requirement reached by the shortest graph path, if any.
    pub requirement: Option<String>,
    pub path: Vec<String>,
    pub emitted: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageOutput {
    pub gaps: Vec<GapReport>,
    /// Classification of every dead statement after analyst verdicts.
    pub classifications: Vec<DeadCode>,
    pub new_props: Vec<String>,
    pub links: Vec<TraceLink>,
    pub unlinked: Vec<String>,
}

fn stmt_no(id: &str) -> u64 {
    id.trim_start_matches('S').parse().unwrap_or(u64::MAX)
}

/// Gaps still classified as gaps, functional statements before fallback
/// arms, each group in statement order.
pub fn order_gaps<'a>(cov: &CoverageMetrics, dm: &'a DesignModel) -> Vec<&'a StatementRef> {
    let mut out: Vec<&StatementRef> = cov
        .dead_code
        .iter()
        .filter(|d| d.classification == DeadCodeClass::Gap)
        .filter_map(|d| dm.statement(&d.statement))
        .collect();
    out.sort_by_key(|s| (s.fallback_arm, stmt_no(&s.id)));
    out
}

fn gap_marker(stmt: &str) -> String {
    format!("gap {stmt}")
}

/// Address each coverage gap once: find blocking assumptions, take the
/// analyst's verdict, link the gap to a requirement and emit targeted
/// properties for real gaps.
#[allow(clippy::too_many_arguments)]
pub fn run_coverage_loop(
    s: &mut Session,
    set: &mut PropertySet,
    cov: &CoverageMetrics,
    g: &Graph,
    dm: &DesignModel,
    net: &NetModel,
    rtl_source: &str,
    cfg: &CheckConfig,
    bounds: RetrievalBounds,
) -> Result<CoverageOutput, AgentError> {
    let idx = SignalIndex::from_design(dm);
    let mut out = CoverageOutput::default();
    let mut classes: BTreeMap<String, DeadCodeClass> =
        cov.dead_code.iter().map(|d| (d.statement.clone(), d.classification)).collect();
    let (bound, _) = set.bind_active(dm, &idx);
    let assumptions: Vec<BoundProperty> = bound.into_iter().filter(|p| p.kind == PropKind::Assumption).collect();
    let src_lines: Vec<&str> = rtl_source.lines().collect();
    let mut reqs: Vec<&str> = g.nodes().iter().filter(|n| n.kind == "requirement").map(|n| n.id.as_str()).collect();
    reqs.sort();

    for st in order_gaps(cov, dm) {
        let marker = gap_marker(&st.id);
        let done = set
            .records
            .iter()
            .any(|r| r.attempt_history.iter().any(|a| a.loop_kind == LoopKind::Coverage && a.diagnosis.starts_with(&marker)));
        if done {
            continue;
        }
        let scope = format!("mod:{}", st.module);
        let candidates: Vec<String> = match g.node(&scope) {
            Some(_) => neighborhood(g, &scope, TaskKind::Coverage, bounds)?
                .of_kind("property")
                .filter(|m| {
                    set.record(&m.id)
                        .is_some_and(|r| r.kind == PropKind::Assumption && r.status == PropStatus::Active)
                })
                .map(|m| m.id.clone())
                .collect(),
            None => Vec::new(),
        };
        let mut blocking = Vec::new();
        for a in &candidates {
            let mut c = cfg.clone();
            c.assumptions = assumptions.iter().filter(|p| &p.prop_id != a).cloned().collect();
            if reachability(net, &c)?.covered.iter().any(|x| x == &st.id) {
                blocking.push(a.clone());
            }
        }

        let source = src_lines.get(st.line as usize - 1).map(|l| l.trim()).unwrap_or("");
        let gap_desc = format!(
            "statement {} in module {} at line {} ({} arm)\nsource: {source}\nblocking assumptions: {}",
            st.id,
            st.module,
            st.line,
            if st.fallback_arm { "fallback" } else { "functional" },
            if blocking.is_empty() { "none".to_string() } else { blocking.join(", ") }
        );
        let answer = s
            .ask(PromptEnvelope::new(AgentRole::CovAnalyzer, format!("cov/{}/analyze", st.id), Shape::Analysis).with(Section::Coverage, gap_desc.as_str()))?
            .raw;
        let first = answer
            .split(|c: char| !c.is_ascii_alphabetic())
            .find(|w| !w.is_empty())
            .unwrap_or("")
            .to_ascii_lowercase();
        let class = match first.as_str() {
            "defensive" => DeadCodeClass::Defensive,
            "gap" => DeadCodeClass::Gap,
            _ => {
                return Err(AgentError::Protocol {
                    role: AgentRole::CovAnalyzer,
                    step_id: format!("cov/{}/analyze", st.id),
                    source: Box::new(AgentError::Shape {
                        shape: Shape::Analysis,
                        reason: "answer must start with 'defensive' or 'gap'".into(),
                        raw: answer,
                    }),
                })
            }
        };
        classes.insert(st.id.clone(), class);
        let mut report = GapReport {
            statement: st.id.clone(),
            module: st.module.clone(),
            fallback_arm: st.fallback_arm,
            blocking,
            classification: class,
            requirement: None,
            path: Vec::new(),
            emitted: Vec::new(),
        };
        if class == DeadCodeClass::Defensive {
            out.gaps.push(report);
            continue;
        }

        let best = reqs
            .iter()
            .filter_map(|r| trace_path(g, &st.id, r).map(|p| (p.len(), r.to_string(), p)))
            .min();
        match best {
            Some((_, r, p)) => {
                report.requirement = Some(r);
                report.path = p;
            }
            None => out.unlinked.push(st.id.clone()),
        }
        let req_ids: Vec<String> = report.requirement.iter().cloned().collect();
        let signals = match g.node(&scope) {
            Some(_) => signal_table(g, &neighborhood(g, &scope, TaskKind::Coverage, bounds)?),
            None => String::new(),
        };
        let resp = s.ask(
            PromptEnvelope::new(AgentRole::CovImprover, format!("cov/{}/improve", st.id), Shape::PropertyBlock)
                .with(Section::Requirement, requirement(g, &req_ids))
                .with(Section::SignalTable, signals)
                .with(Section::Coverage, gap_desc.as_str())
                .with(Section::Notes, answer.as_str()),
        )?;
        let Payload::PropertyBlock(block) = resp.payload else {
            unreachable!("property_block envelope")
        };
        let note = AttemptNote {
            loop_kind: LoopKind::Coverage,
            attempt_no: 1,
            diagnosis: format!("{marker}: {}", answer.lines().next().unwrap_or("").trim()),
            patch_summary: "emitted by cov_improver".into(),
            outcome: Outcome::Fixed,
        };
        let ids = set.add_block(&block, &req_ids, PropStatus::Active, &[note]);
        for p in &ids {
            if let Some(r) = &report.requirement {
                out.links.push(TraceLink {
                    src_id: p.clone(),
                    dst_id: r.clone(),
                    link_kind: LinkKind::Validates,
                });
            }
        }
        out.new_props.extend(ids.iter().cloned());
        report.emitted = ids;
        out.gaps.push(report);
    }
    out.classifications = classes
        .into_iter()
        .map(|(statement, classification)| DeadCode { statement, classification })
        .collect();
    out.classifications.sort_by_key(|d| stmt_no(&d.statement));
    Ok(out)
}
