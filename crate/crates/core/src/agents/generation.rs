// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::ir::{AttemptNote, LinkKind, LoopKind, Outcome, PropStatus, Requirement, TestPlanEntry, TraceLink};
use crate::kg::{neighborhood, Graph, RetrievalBounds, TaskKind};

use super::context::{prior_code, requirement, signal_table, spec_fragment};
use super::envelope::{Payload, PromptEnvelope, Section, Shape};
use super::props::PropertySet;
use super::{AgentError, AgentRole, Session};

/// Reviewer rounds before a requirement's properties are emitted disabled.
pub const MAX_REVIEW_ROUNDS: u32 = 3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationOutput {
    /// New property ids per requirement.
    pub generated: BTreeMap<String, Vec<String>>,
    pub links: Vec<TraceLink>,
    /// Decomposition of each requirement into trigger, response and timing.
    pub plan: Vec<TestPlanEntry>,
    /// Review rounds used per requirement.
    pub rounds: BTreeMap<String, u32>,
    pub disabled: Vec<String>,
}

fn decomposition(req_id: &str, text: &str) -> TestPlanEntry {
    let field = |key: &str| {
        text.lines()
            .find_map(|l| {
                let (k, v) = l.split_once(':')?;
                (k.trim().eq_ignore_ascii_case(key)).then(|| v.trim().to_string())
            })
            .unwrap_or_default()
    };
    let timing = field("timing");
    TestPlanEntry {
        req_id: req_id.to_string(),
        observable_signals: Vec::new(),
        stimulus: field("trigger"),
        expected_response: field("response"),
        timing_constraint: (!timing.is_empty()).then_some(timing),
    }
}

fn block_of(p: Payload) -> String {
    match p {
        Payload::PropertyBlock(b) => b,
        _ => unreachable!("property_block envelope"),
    }
}

/// Generate properties for each requirement in id order and append them to
/// `set`. Returns the validates links and decompositions to merge into the
/// bundle.
pub fn run_generation(
    s: &mut Session,
    g: &Graph,
    reqs: &[Requirement],
    rulebook: &str,
    set: &mut PropertySet,
    bounds: RetrievalBounds,
) -> Result<GenerationOutput, AgentError> {
    let mut out = GenerationOutput::default();
    let mut order: Vec<&Requirement> = reqs.iter().collect();
    order.sort_by(|a, b| a.req_id.cmp(&b.req_id));
    for q in &order {
        if g.node(&q.req_id).is_none() {
            return Err(AgentError::MissingNode(q.req_id.clone()));
        }
    }
    for q in order {
        let id = q.req_id.as_str();
        let cb = neighborhood(g, id, TaskKind::Generation, bounds)?;
        let req_text = requirement(g, std::slice::from_ref(&q.req_id));
        let fragment = spec_fragment(g, &cb);
        let signals = signal_table(g, &cb);
        let prior = prior_code(g, &cb, "");
        let base = |role: AgentRole, step: String, shape: Shape| {
            PromptEnvelope::new(role, step, shape)
                .with(Section::Requirement, req_text.as_str())
                .with(Section::SpecFragment, fragment.as_str())
                .with(Section::SignalTable, signals.as_str())
        };

        let strategy = s
            .ask(base(AgentRole::SvaLead, format!("gen/{id}/lead"), Shape::Analysis).with(Section::Rulebook, rulebook))?
            .raw;
        let analysis = s
            .ask(base(AgentRole::SpecAnalyst, format!("gen/{id}/analyze"), Shape::Analysis).with(Section::Notes, strategy))?
            .raw;
        out.plan.push(decomposition(id, &analysis));
        let mut block = block_of(
            s.ask(
                base(AgentRole::SvaAuthor, format!("gen/{id}/author"), Shape::PropertyBlock)
                    .with(Section::Rulebook, rulebook)
                    .with(Section::PriorCode, prior.as_str())
                    .with(Section::Notes, analysis.as_str()),
            )?
            .payload,
        );

        let mut notes: Vec<AttemptNote> = Vec::new();
        let mut status = PropStatus::Active;
        let mut round = 1;
        loop {
            let verdict = s.ask(
                base(AgentRole::SvaReviewer, format!("gen/{id}/review/{round}"), Shape::Verdict)
                    .with(Section::Rulebook, rulebook)
                    .with(Section::PriorCode, block.as_str()),
            )?;
            let Payload::Verdict { approve, reasons } = verdict.payload else {
                unreachable!("verdict envelope")
            };
            if approve {
                if let Some(last) = notes.last_mut() {
                    last.outcome = Outcome::Fixed;
                }
                break;
            }
            let diagnosis = reasons.join("; ");
            if round == MAX_REVIEW_ROUNDS {
                notes.push(AttemptNote {
                    loop_kind: LoopKind::Review,
                    attempt_no: round,
                    diagnosis,
                    patch_summary: format!("rejected in {MAX_REVIEW_ROUNDS} review rounds"),
                    outcome: Outcome::Disabled,
                });
                status = PropStatus::Disabled;
                break;
            }
            block = block_of(
                s.ask(
                    base(AgentRole::SvaPatcher, format!("gen/{id}/patch/{round}"), Shape::PropertyBlock)
                        .with(Section::Rulebook, rulebook)
                        .with(Section::PriorCode, block.as_str())
                        .with(Section::Diagnostics, reasons.join("\n")),
                )?
                .payload,
            );
            notes.push(AttemptNote {
                loop_kind: LoopKind::Review,
                attempt_no: round,
                diagnosis,
                patch_summary: "revised by sva_patcher".into(),
                outcome: Outcome::Retry,
            });
            round += 1;
        }
        out.rounds.insert(id.to_string(), round);

        let ids = set.add_block(&block, std::slice::from_ref(&q.req_id), status, &notes);
        for p in &ids {
            out.links.push(TraceLink {
                src_id: p.clone(),
                dst_id: q.req_id.clone(),
                link_kind: LinkKind::Validates,
            });
            if status == PropStatus::Disabled {
                out.disabled.push(p.clone());
            }
        }
        out.generated.insert(id.to_string(), ids);
    }
    Ok(out)
}
