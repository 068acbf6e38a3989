// SPDX-License-Identifier: Apache-2.0

//! Agent pipelines for generation, syntax repair, counterexample repair and
//! coverage closure, driven through a pluggable backend.

mod backend;
mod cex;
mod context;
mod coverage;
mod envelope;
mod generation;
mod props;
mod roles;
mod syntax;

pub use backend::{
    default_classifier, Backend, ClassifierRule, LiveBackend, LiveConfig, ReplayBackend, Script, ScriptRule,
    ScriptedBackend, Session, Transcript, TranscriptEntry, DEFAULT_CONTEXT_BUDGET, LIVE_TRIES,
};
pub use cex::{run_cex_loop, CexConfig, CexOutput};
pub use coverage::{order_gaps, run_coverage_loop, CoverageOutput, GapReport};
pub use envelope::{parse_payload, AgentResponse, Payload, PromptEnvelope, Section, Shape};
pub use generation::{run_generation, GenerationOutput, MAX_REVIEW_ROUNDS};
pub use props::{relabel, PropertySet, PROPERTY_FILE};
pub use roles::AgentRole;
pub use syntax::{run_syntax_loop, RepairRule, SyntaxOutput};

use crate::engine::EngineError;
use crate::kg::GraphError;

/// Per-property attempt budget of every repair loop.
pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("response does not parse as {shape}: {reason}")]
    Shape { shape: Shape, reason: String, raw: String },
    #[error("no scripted rule for {role} at step '{step_id}'")]
    NoRule { role: AgentRole, step_id: String },
    #[error("replay miss: no recorded response for envelope {digest}")]
    ReplayMiss { digest: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("context of {size} bytes exceeds the budget of {budget}")]
    Budget { size: usize, budget: usize },
    #[error("protocol error from {role} at step '{step_id}': {source}")]
    Protocol {
        role: AgentRole,
        step_id: String,
        #[source]
        source: Box<AgentError>,
    },
    #[error("{0}")]
    Config(String),
    #[error("no graph node for '{0}'")]
    MissingNode(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
