// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rtl::DesignModel;
use crate::sva::PropKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecChunk {
    pub chunk_id: String,
    pub heading_path: Vec<String>,
    pub text: String,
    #[serde(default)]
    pub semantic_tags: Vec<String>,
    pub order_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Functional,
    Timing,
    Interface,
    Safety,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    High,
    Medium,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub req_id: String,
    pub text: String,
    pub category: Category,
    pub priority: Priority,
    pub source_chunks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPlanEntry {
    pub req_id: String,
    pub observable_signals: Vec<String>,
    pub stimulus: String,
    pub expected_response: String,
    #[serde(default)]
    pub timing_constraint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropStatus {
    Active,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Syntax,
    Cex,
    Coverage,
    /// Reviewer rounds during generation.
    Review,
}

impl LoopKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LoopKind::Syntax => "syntax",
            LoopKind::Cex => "cex",
            LoopKind::Coverage => "coverage",
            LoopKind::Review => "review",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Fixed,
    Retry,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptNote {
    pub loop_kind: LoopKind,
    pub attempt_no: u32,
    pub diagnosis: String,
    pub patch_summary: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub prop_id: String,
    pub req_ids: Vec<String>,
    pub kind: PropKind,
    pub sva_text: String,
    pub line_span: (u32, u32),
    pub status: PropStatus,
    #[serde(default)]
    pub attempt_history: Vec<AttemptNote>,
}

impl PropertyRecord {
    pub fn attempts(&self, kind: LoopKind) -> usize {
        self.attempt_history.iter().filter(|a| a.loop_kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    DerivesFrom,
    Validates,
    Proves,
    Fails,
    Covers,
}

impl LinkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::DerivesFrom => "derives_from",
            LinkKind::Validates => "validates",
            LinkKind::Proves => "proves",
            LinkKind::Fails => "fails",
            LinkKind::Covers => "covers",
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TraceLink {
    pub src_id: String,
    pub dst_id: String,
    pub link_kind: LinkKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormalStatus {
    Proven,
    Cex,
    Vacuous,
    Bounded,
    Error,
}

impl FormalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FormalStatus::Proven => "proven",
            FormalStatus::Cex => "cex",
            FormalStatus::Vacuous => "vacuous",
            FormalStatus::Bounded => "bounded",
            FormalStatus::Error => "error",
        }
    }

    /// Edge kind linking a result to its property.
    pub fn link_kind(self) -> LinkKind {
        match self {
            FormalStatus::Cex | FormalStatus::Error => LinkKind::Fails,
            _ => LinkKind::Proves,
        }
    }
}

impl fmt::Display for FormalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalResult {
    pub result_id: String,
    pub prop_id: String,
    pub status: FormalStatus,
    #[serde(default)]
    pub proof_depth: Option<u32>,
    /// Milliseconds.
    pub runtime: u64,
    #[serde(default)]
    pub artifact_path: Option<String>,
    /// Pipeline stage that produced the result (`formal`, `cex_recheck:1`, ...).
    #[serde(default)]
    pub stage: String,
    /// Superseded by a later result for the same property.
    #[serde(default)]
    pub stale: bool,
    /// Imported from an external tool report.
    #[serde(default)]
    pub external: bool,
    #[serde(default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootCause {
    RtlBug,
    OverSpecification,
    MissingAssumption,
    UnderSpecification,
}

impl RootCause {
    pub fn as_str(self) -> &'static str {
        match self {
            RootCause::RtlBug => "rtl_bug",
            RootCause::OverSpecification => "over_specification",
            RootCause::MissingAssumption => "missing_assumption",
            RootCause::UnderSpecification => "under_specification",
        }
    }

    pub fn parse(s: &str) -> Option<RootCause> {
        Some(match s.trim() {
            "rtl_bug" => RootCause::RtlBug,
            "over_specification" => RootCause::OverSpecification,
            "missing_assumption" => RootCause::MissingAssumption,
            "under_specification" => RootCause::UnderSpecification,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CexCase {
    pub cex_id: String,
    pub prop_id: String,
    /// Result whose counterexample this is.
    #[serde(default)]
    pub result_id: Option<String>,
    pub vcd_path: String,
    pub failure_time: u64,
    pub failure_line: u32,
    #[serde(default)]
    pub attempts: Vec<AttemptNote>,
    #[serde(default)]
    pub root_cause: Option<RootCause>,
    /// `missing_artifact`, `manual_analysis`, or a bug description.
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadCodeClass {
    Defensive,
    Gap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadCode {
    pub statement: String,
    pub classification: DeadCodeClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMetrics {
    pub cov_id: String,
    pub run_ref: String,
    pub reachable_pct: f64,
    pub covered_statements: Vec<String>,
    pub unreachable_statements: Vec<String>,
    pub dead_code: Vec<DeadCode>,
    pub vacuity_count: u32,
    #[serde(default)]
    pub proof_core_ratio: Option<f64>,
    /// Exploration hit a budget; unreachable means "not reached".
    #[serde(default)]
    pub partial: bool,
    #[serde(default)]
    pub stage: String,
    #[serde(default)]
    pub stale: bool,
}

impl CoverageMetrics {
    /// 100 × covered / (covered + uncovered); 100 when there are no statements.
    pub fn percent(covered: usize, uncovered: usize) -> f64 {
        if covered + uncovered == 0 {
            100.0
        } else {
            100.0 * covered as f64 / (covered + uncovered) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunContext {
    pub run_id: String,
    #[serde(default)]
    pub artifact_paths: BTreeMap<String, String>,
    #[serde(default)]
    pub iteration_counts: BTreeMap<String, u32>,
    pub tool_version: String,
    pub created_at: String,
    #[serde(default)]
    pub config_snapshot: serde_json::Value,
}

/// All artifacts of one run. `None` means the kind is absent (no file).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunBundle {
    pub context: RunContext,
    pub spec_chunks: Option<Vec<SpecChunk>>,
    pub requirements: Option<Vec<Requirement>>,
    pub test_plan: Option<Vec<TestPlanEntry>>,
    pub design_model: Option<DesignModel>,
    pub properties: Option<Vec<PropertyRecord>>,
    pub trace_links: Option<Vec<TraceLink>>,
    pub formal_results: Option<Vec<FormalResult>>,
    pub cex_cases: Option<Vec<CexCase>>,
    pub coverage_metrics: Option<Vec<CoverageMetrics>>,
    /// Auxiliary text files (waveforms, transcripts) by path relative to
    /// the run directory, e.g. `cex/CEX-001.vcd`.
    pub files: BTreeMap<String, String>,
}

macro_rules! slice_of {
    ($name:ident, $field:ident, $t:ty) => {
        pub fn $name(&self) -> &[$t] {
            self.$field.as_deref().unwrap_or(&[])
        }
    };
}

impl RunBundle {
    slice_of!(chunks, spec_chunks, SpecChunk);
    slice_of!(reqs, requirements, Requirement);
    slice_of!(plan, test_plan, TestPlanEntry);
    slice_of!(props, properties, PropertyRecord);
    slice_of!(links, trace_links, TraceLink);
    slice_of!(results, formal_results, FormalResult);
    slice_of!(cexes, cex_cases, CexCase);
    slice_of!(coverage, coverage_metrics, CoverageMetrics);

    pub fn property(&self, id: &str) -> Option<&PropertyRecord> {
        self.props().iter().find(|p| p.prop_id == id)
    }

    /// Latest non-stale result per property.
    pub fn current_results(&self) -> BTreeMap<&str, &FormalResult> {
        let mut out = BTreeMap::new();
        for r in self.results().iter().filter(|r| !r.stale) {
            out.insert(r.prop_id.as_str(), r);
        }
        out
    }

    pub fn latest_coverage(&self) -> Option<&CoverageMetrics> {
        self.coverage().iter().rev().find(|c| !c.stale)
    }
}

/// The twelve persisted artifact kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    SpecChunks,
    Requirements,
    TestPlan,
    DesignModel,
    Properties,
    TraceLinks,
    FormalResults,
    CexCases,
    CoverageMetrics,
    RunContext,
    Nodes,
    Edges,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 12] = [
        ArtifactKind::SpecChunks,
        ArtifactKind::Requirements,
        ArtifactKind::TestPlan,
        ArtifactKind::DesignModel,
        ArtifactKind::Properties,
        ArtifactKind::TraceLinks,
        ArtifactKind::FormalResults,
        ArtifactKind::CexCases,
        ArtifactKind::CoverageMetrics,
        ArtifactKind::RunContext,
        ArtifactKind::Nodes,
        ArtifactKind::Edges,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ArtifactKind::SpecChunks => "spec_chunks.json",
            ArtifactKind::Requirements => "requirements.json",
            ArtifactKind::TestPlan => "testplan.json",
            ArtifactKind::DesignModel => "design_model.json",
            ArtifactKind::Properties => "properties.json",
            ArtifactKind::TraceLinks => "tracelinks.json",
            ArtifactKind::FormalResults => "formal_results.json",
            ArtifactKind::CexCases => "cex_cases.json",
            ArtifactKind::CoverageMetrics => "coverage_metrics.json",
            ArtifactKind::RunContext => "run_context.json",
            ArtifactKind::Nodes => "nodes.csv",
            ArtifactKind::Edges => "edges.csv",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            ArtifactKind::SpecChunks => "spec_chunks",
            ArtifactKind::Requirements => "requirements",
            ArtifactKind::TestPlan => "testplan",
            ArtifactKind::DesignModel => "design_model",
            ArtifactKind::Properties => "properties",
            ArtifactKind::TraceLinks => "tracelinks",
            ArtifactKind::FormalResults => "formal_results",
            ArtifactKind::CexCases => "cex_cases",
            ArtifactKind::CoverageMetrics => "coverage_metrics",
            ArtifactKind::RunContext => "run_context",
            ArtifactKind::Nodes => "nodes",
            ArtifactKind::Edges => "edges",
        }
    }

    pub fn from_key(s: &str) -> Option<ArtifactKind> {
        ArtifactKind::ALL.into_iter().find(|k| k.key() == s)
    }
}

/// `PREFIX-` plus a number zero-padded to three digits.
pub fn make_id(prefix: &str, n: usize) -> String {
    format!("{prefix}-{n:03}")
}

/// Numeric part of an id made by [`make_id`].
pub fn id_number(id: &str) -> Option<usize> {
    id.rsplit_once('-').and_then(|(_, n)| n.parse().ok())
}

/// Next free number for a prefix among existing ids.
pub fn next_id<'a>(prefix: &str, existing: impl IntoIterator<Item = &'a str>) -> String {
    let max = existing
        .into_iter()
        .filter(|id| id.starts_with(prefix) && id.as_bytes().get(prefix.len()) == Some(&b'-'))
        .filter_map(id_number)
        .max()
        .unwrap_or(0);
    make_id(prefix, max + 1)
}
