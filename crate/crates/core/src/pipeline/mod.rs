// SPDX-License-Identifier: Apache-2.0

//! End-to-end driver: ingest, generation, formal checking, the repair and
//! coverage loops, persistence and reporting.

mod ingest;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::agents::{
    run_cex_loop, run_coverage_loop, run_generation, run_syntax_loop, AgentError, CexConfig, LiveBackend, LiveConfig,
    PropertySet, ReplayBackend, Script, ScriptedBackend, Session, Transcript, DEFAULT_CONTEXT_BUDGET,
};
use crate::engine::{check_all, coverage_from, reachability, CheckConfig, EngineError};
use crate::ir::{
    export_graph, save_run, CoverageMetrics, DeadCodeClass, ExportError, FormalResult, FormalStatus, LinkKind, RunBundle,
    StoreError, TestPlanEntry, TraceLink,
};
use crate::kg::{render_html, Graph, GraphError, RetrievalBounds, SignalIndex};
use crate::rtl::{elaborate, parse_rtl, Design, NetModel};
use crate::sva::{exact_or_suffix, BoundProperty, PropKind};
use crate::vcd::{write_vcd, Timescale, VcdError};

pub use ingest::{chunk_spec, extract_requirements, ROOT_HEADING};
pub use report::{render_table, report, RunReport, Tally};

/// Environment variable holding the live backend's API key.
pub const API_KEY_ENV: &str = "KGFV_API_KEY";
pub const TRANSCRIPT_FILE: &str = "agents/transcript.json";
pub const RTL_FILE: &str = "rtl/design.v";
pub const HTML_FILE: &str = "graph.html";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("specification is empty")]
    EmptySpec,
    #[error("RTL does not compile:\n{0}")]
    Rtl(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Vcd(#[from] VcdError),
    #[error("stage '{stage}' aborted{}: {source}", saved.as_ref().map(|s| format!(" (partial run saved as {s})")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        saved: Option<String>,
        source: Box<PipelineError>,
    },
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    #[default]
    Scripted,
    Replay,
}

impl std::str::FromStr for BackendKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, PipelineError> {
        match s {
            "live" => Ok(BackendKind::Live),
            "scripted" => Ok(BackendKind::Scripted),
            "replay" => Ok(BackendKind::Replay),
            other => Err(PipelineError::Config(format!("unknown backend '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spec: PathBuf,
    pub rtl: Vec<PathBuf>,
    pub top: Option<String>,
    pub params: BTreeMap<String, u64>,
    pub rulebook: Option<PathBuf>,
    /// Root under which run directories are created.
    #[serde(skip)]
    pub out: PathBuf,
    pub backend: BackendKind,
    /// Rules file for the scripted backend.
    pub script: Option<PathBuf>,
    /// Recorded transcript for the replay backend.
    pub transcript: Option<PathBuf>,
    pub live: Option<LiveConfig>,
    pub radius: u32,
    pub type_cap: Option<usize>,
    pub max_states: usize,
    pub max_depth: u32,
    pub cex_iters: u32,
    pub cov_iters: u32,
    pub context_budget: usize,
    /// Fixed RFC 3339 creation time. Also zeroes measured runtimes so that
    /// repeated runs are byte-identical.
    pub frozen_time: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let engine = CheckConfig::default();
        let bounds = RetrievalBounds::default();
        RunConfig {
            spec: PathBuf::new(),
            rtl: Vec::new(),
            top: None,
            params: BTreeMap::new(),
            rulebook: None,
            out: PathBuf::from("runs"),
            backend: BackendKind::Scripted,
            script: None,
            transcript: None,
            live: None,
            radius: bounds.radius,
            type_cap: bounds.type_cap,
            max_states: engine.max_states,
            max_depth: engine.max_depth,
            cex_iters: 2,
            cov_iters: 2,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            frozen_time: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let must_exist = |p: &Path, what: &str| {
            if p.is_file() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!("{what} '{}' does not exist", p.display())))
            }
        };
        must_exist(&self.spec, "spec file")?;
        if self.rtl.is_empty() {
            return Err(PipelineError::Config("at least one RTL file is required".into()));
        }
        for r in &self.rtl {
            must_exist(r, "RTL file")?;
        }
        if let Some(r) = &self.rulebook {
            must_exist(r, "rulebook")?;
        }
        match self.backend {
            BackendKind::Replay => must_exist(
                self.transcript
                    .as_deref()
                    .ok_or_else(|| PipelineError::Config("replay backend needs a transcript".into()))?,
                "transcript",
            )?,
            BackendKind::Scripted => {
                if let Some(s) = &self.script {
                    must_exist(s, "script")?;
                }
            }
            BackendKind::Live => {
                if self.live.is_none() {
                    return Err(PipelineError::Config("live backend needs [live] endpoint settings".into()));
                }
            }
        }
        if self.cex_iters == 0 || self.cov_iters == 0 || self.max_depth == 0 || self.max_states == 0 || self.context_budget == 0 {
            return Err(PipelineError::Config("iteration caps and budgets must be positive".into()));
        }
        if let Some(t) = &self.frozen_time {
            DateTime::parse_from_rfc3339(t).map_err(|e| PipelineError::Config(format!("frozen_time '{t}': {e}")))?;
        }
        Ok(())
    }

    pub fn bounds(&self) -> RetrievalBounds {
        RetrievalBounds {
            radius: self.radius,
            type_cap: self.type_cap,
        }
    }

    pub fn engine(&self) -> CheckConfig {
        CheckConfig {
            max_states: self.max_states,
            max_depth: self.max_depth,
            assumptions: Vec::new(),
        }
    }

    pub fn open_session(&self) -> Result<Session, PipelineError> {
        let mut s = match self.backend {
            BackendKind::Scripted => {
                let script = match &self.script {
                    Some(p) => Script::from_json(&read(p)?)?,
                    None => Script::default(),
                };
                Session::new(Box::new(ScriptedBackend::new(script)?))
            }
            BackendKind::Replay => {
                let p = self.transcript.as_deref().expect("validated");
                let mut t = Transcript::from_json(&read(p)?)?;
                t.run_id = p
                    .parent()
                    .and_then(|d| d.parent())
                    .and_then(|d| d.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Session::new(Box::new(ReplayBackend::new(&t)))
            }
            BackendKind::Live => {
                let live = self.live.clone().expect("validated");
                Session::new(Box::new(LiveBackend::new(live, std::env::var(API_KEY_ENV).ok())))
            }
        };
        s.budget = self.context_budget;
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub report: RunReport,
    pub bundle: RunBundle,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    session: Session,
    bundle: RunBundle,
    set: PropertySet,
    design: Option<Design>,
    net: Option<NetModel>,
    rtl_src: String,
    frozen: bool,
}

fn next_id(prefix: &str, ids: impl Iterator<Item = String>) -> u32 {
    ids.filter_map(|i| i.strip_prefix(prefix)?.parse::<u32>().ok()).max().unwrap_or(0) + 1
}

impl<'a> Run<'a> {
    fn graph(&self) -> Result<Graph, PipelineError> {
        Ok(Graph::from_bundle(&self.bundle)?)
    }

    fn dm(&self) -> &crate::rtl::DesignModel {
        &self.design.as_ref().expect("rtl stage ran").model
    }

    fn net(&self) -> &NetModel {
        self.net.as_ref().expect("rtl stage ran")
    }

    fn links(&mut self) -> &mut Vec<TraceLink> {
        self.bundle.trace_links.get_or_insert_with(Vec::new)
    }

    fn ingest(&mut self) -> Result<(), PipelineError> {
        let chunks = chunk_spec(&read(&self.cfg.spec)?)?;
        let (reqs, links) = extract_requirements(&mut self.session, &chunks)?;
        self.bundle.spec_chunks = Some(chunks);
        self.bundle.requirements = Some(reqs);
        self.links().extend(links);
        Ok(())
    }

    fn rtl(&mut self) -> Result<(), PipelineError> {
        let mut src = String::new();
        for p in &self.cfg.rtl {
            src.push_str(&read(p)?);
            if !src.ends_with('\n') {
                src.push('\n');
            }
        }
        let design = parse_rtl(&src).map_err(|d| PipelineError::Rtl(d.render(RTL_FILE)))?;
        let top = match (&self.cfg.top, &design.model.top) {
            (Some(t), _) | (None, Some(t)) => t.clone(),
            (None, None) => return Err(PipelineError::Config("no unique top module; pass --top".into())),
        };
        let net = elaborate(&design, &top, &self.cfg.params).map_err(|d| PipelineError::Rtl(d.render(RTL_FILE)))?;
        let idx = SignalIndex::from_design(&design.model);
        let mut plan = Vec::new();
        for q in self.bundle.reqs() {
            let mut seen = BTreeSet::new();
            for w in q.text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.')) {
                let w = w.trim_matches('.');
                if w.is_empty() || !w.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
                    continue;
                }
                if let [one] = exact_or_suffix(&design.model, &idx, w).as_slice() {
                    seen.insert(one.clone());
                }
            }
            plan.push(TestPlanEntry {
                req_id: q.req_id.clone(),
                observable_signals: seen.into_iter().collect(),
                stimulus: String::new(),
                expected_response: String::new(),
                timing_constraint: None,
            });
        }
        self.bundle.test_plan = Some(plan);
        self.bundle.design_model = Some(design.model.clone());
        self.bundle.files.insert(RTL_FILE.to_string(), src.clone());
        self.rtl_src = src;
        self.design = Some(design);
        self.net = Some(net);
        Ok(())
    }

    fn generate(&mut self) -> Result<(), PipelineError> {
        let g = self.graph()?;
        let rulebook = match &self.cfg.rulebook {
            Some(p) => read(p)?,
            None => String::new(),
        };
        let reqs = self.bundle.reqs().to_vec();
        let out = run_generation(&mut self.session, &g, &reqs, &rulebook, &mut self.set, self.cfg.bounds())?;
        self.links().extend(out.links);
        if let Some(plan) = self.bundle.test_plan.as_mut() {
            for d in out.plan {
                if let Some(e) = plan.iter_mut().find(|e| e.req_id == d.req_id) {
                    e.stimulus = d.stimulus;
                    e.expected_response = d.expected_response;
                    e.timing_constraint = d.timing_constraint;
                }
            }
        }
        let rounds: u32 = out.rounds.values().sum();
        self.bundle.context.iteration_counts.insert("review_rounds".into(), rounds);
        self.set.store(&mut self.bundle);
        Ok(())
    }

    fn syntax(&mut self) -> Result<(), PipelineError> {
        let g = self.graph()?;
        let dm = self.design.as_ref().expect("rtl stage ran").model.clone();
        let out = run_syntax_loop(&mut self.session, &mut self.set, &dm, &g, self.cfg.bounds())?;
        *self.bundle.context.iteration_counts.entry("syntax_passes".into()).or_default() += out.passes;
        self.set.store(&mut self.bundle);
        Ok(())
    }

    fn assumptions(&self) -> (Vec<BoundProperty>, Vec<BoundProperty>, BTreeMap<String, String>) {
        let idx = SignalIndex::from_design(self.dm());
        let (bound, errors) = self.set.bind_active(self.dm(), &idx);
        let (assume, check): (Vec<_>, Vec<_>) = bound.into_iter().partition(|p| p.kind == PropKind::Assumption);
        (assume, check, errors)
    }

    /// Check the given properties (all when `only` is `None`) and append
    /// their results; earlier results of the same properties go stale.
    fn formal(&mut self, stage: &str, only: Option<&BTreeSet<String>>) -> Result<(), PipelineError> {
        let (assume, mut targets, errors) = self.assumptions();
        if let Some(o) = only {
            targets.retain(|p| o.contains(&p.prop_id));
        }
        let mut cfg = self.cfg.engine();
        cfg.assumptions = assume;
        let mut verdicts = check_all(self.net(), &targets, &cfg);
        for (id, msg) in &errors {
            let wanted = only.is_none_or(|o| o.contains(id));
            let checkable = self.set.record(id).is_some_and(|r| r.kind != PropKind::Assumption);
            if wanted && checkable {
                verdicts.push(crate::engine::Verdict {
                    prop_id: id.clone(),
                    status: FormalStatus::Error,
                    proof_depth: None,
                    runtime_ms: 0,
                    trace: None,
                    states: 0,
                    antecedent_matched: false,
                    message: Some(msg.clone()),
                });
            }
        }
        verdicts.sort_by(|a, b| a.prop_id.cmp(&b.prop_id));
        let rechecked: BTreeSet<&str> = verdicts.iter().map(|v| v.prop_id.as_str()).collect();
        for r in self.bundle.formal_results.get_or_insert_with(Vec::new) {
            if rechecked.contains(r.prop_id.as_str()) {
                r.stale = true;
            }
        }
        let first = next_id("RES-", self.bundle.results().iter().map(|r| r.result_id.clone()));
        let mut results: Vec<FormalResult> = Vec::new();
        let mut links = Vec::new();
        for (n, v) in (first..).zip(&verdicts) {
            let id = format!("RES-{n:03}");
            let mut artifact = None;
            if v.status == FormalStatus::Cex {
                if let Some(t) = &v.trace {
                    let path = format!("waveforms/{id}.vcd");
                    self.bundle.files.insert(path.clone(), write_vcd(t, &Timescale::default())?);
                    artifact = Some(path);
                }
            }
            let mut r = v.to_result(&id, stage, artifact);
            if self.frozen {
                r.runtime = 0;
            }
            links.push(TraceLink {
                src_id: id.clone(),
                dst_id: v.prop_id.clone(),
                link_kind: v.status.link_kind(),
            });
            results.push(r);
        }
        self.bundle.formal_results.get_or_insert_with(Vec::new).extend(results);
        self.links().extend(links);
        Ok(())
    }

    fn cex(&mut self) -> Result<(), PipelineError> {
        let dm = self.dm().clone();
        let cfg = CexConfig {
            engine: self.cfg.engine(),
            ..CexConfig::default()
        };
        for i in 1..=self.cfg.cex_iters {
            let mut g = self.graph()?;
            let net = self.net.take().expect("rtl stage ran");
            let out = run_cex_loop(&mut self.session, &mut self.set, &self.bundle, &mut g, &net, &dm, &self.rtl_src, &cfg);
            self.net = Some(net);
            let out = out?;
            self.bundle.context.iteration_counts.insert("cex".into(), i);
            let opened = !out.cases.is_empty();
            self.bundle.cex_cases.get_or_insert_with(Vec::new).extend(out.cases);
            self.set.store(&mut self.bundle);
            let mut recheck: BTreeSet<String> = BTreeSet::new();
            for r in self.bundle.formal_results.get_or_insert_with(Vec::new) {
                if out.invalidated.contains(&r.result_id) && !r.stale {
                    r.stale = true;
                    recheck.insert(r.prop_id.clone());
                }
            }
            for c in self.bundle.coverage_metrics.iter_mut().flatten() {
                if out.invalidated.contains(&c.cov_id) {
                    c.stale = true;
                }
            }
            if !recheck.is_empty() {
                self.formal(&format!("cex-{i}"), Some(&recheck))?;
            }
            if !opened {
                break;
            }
        }
        Ok(())
    }

    fn measure_coverage(&mut self, stage: &str, classes: &BTreeMap<String, DeadCodeClass>) -> Result<(), PipelineError> {
        let (assume, _, _) = self.assumptions();
        let mut cfg = self.cfg.engine();
        cfg.assumptions = assume;
        let reach = reachability(self.net(), &cfg)?;
        let n = next_id("COV-", self.bundle.coverage().iter().map(|c| c.cov_id.clone()));
        let cov_id = format!("COV-{n:03}");
        let mut m: CoverageMetrics = coverage_from(&reach, &[], &cov_id, "");
        m.stage = stage.to_string();
        let current = self.bundle.current_results();
        m.vacuity_count = current.values().filter(|r| r.status == FormalStatus::Vacuous).count() as u32;
        for d in &mut m.dead_code {
            if let Some(c) = classes.get(&d.statement) {
                d.classification = *c;
            }
        }
        let covers: Vec<String> = current
            .values()
            .filter(|r| r.status == FormalStatus::Proven)
            .filter(|r| self.set.record(&r.prop_id).is_some_and(|p| p.kind == PropKind::Cover))
            .map(|r| r.prop_id.clone())
            .collect();
        for c in self.bundle.coverage_metrics.iter_mut().flatten() {
            c.stale = true;
        }
        self.bundle.coverage_metrics.get_or_insert_with(Vec::new).push(m);
        for p in covers {
            self.links().push(TraceLink {
                src_id: p,
                dst_id: cov_id.clone(),
                link_kind: LinkKind::Covers,
            });
        }
        Ok(())
    }

    fn coverage(&mut self) -> Result<(), PipelineError> {
        self.measure_coverage("coverage", &BTreeMap::new())?;
        let dm = self.dm().clone();
        for i in 1..=self.cfg.cov_iters {
            let g = self.graph()?;
            let cov = self.bundle.latest_coverage().expect("measured").clone();
            let (assume, _, _) = self.assumptions();
            let mut cfg = self.cfg.engine();
            cfg.assumptions = assume;
            let net = self.net.take().expect("rtl stage ran");
            let out = run_coverage_loop(
                &mut self.session,
                &mut self.set,
                &cov,
                &g,
                &dm,
                &net,
                &self.rtl_src,
                &cfg,
                self.cfg.bounds(),
            );
            self.net = Some(net);
            let out = out?;
            self.bundle.context.iteration_counts.insert("coverage".into(), i);
            if out.gaps.is_empty() {
                break;
            }
            self.links().extend(out.links.iter().cloned());
            for gap in &out.gaps {
                for p in &gap.emitted {
                    self.links().push(TraceLink {
                        src_id: p.clone(),
                        dst_id: gap.statement.clone(),
                        link_kind: LinkKind::Covers,
                    });
                }
            }
            self.set.store(&mut self.bundle);
            if !out.new_props.is_empty() {
                self.syntax()?;
                let fresh: BTreeSet<String> = out.new_props.iter().cloned().collect();
                self.formal(&format!("coverage-{i}"), Some(&fresh))?;
            }
            let classes = out.classifications.iter().map(|d| (d.statement.clone(), d.classification)).collect();
            self.measure_coverage(&format!("coverage-{i}"), &classes)?;
            if out.new_props.is_empty() {
                break;
            }
        }
        Ok(())
    }

    fn prepare_context(&mut self) {
        self.set.store(&mut self.bundle);
        self.bundle
            .files
            .insert(TRANSCRIPT_FILE.to_string(), self.session.transcript.to_json());
        let ctx = &mut self.bundle.context;
        ctx.tool_version = env!("CARGO_PKG_VERSION").to_string();
        ctx.created_at = self.cfg.frozen_time.clone().unwrap_or_else(|| Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true));
        ctx.config_snapshot = serde_json::to_value(self.cfg).expect("config serializes");
    }

    fn save(&mut self) -> Result<PathBuf, PipelineError> {
        self.prepare_context();
        let ctx = save_run(&self.bundle, &self.cfg.out)?;
        self.bundle.context = ctx;
        Ok(self.cfg.out.join(&self.bundle.context.run_id))
    }
}

/// Run every stage and persist the run. A failing stage still saves what
/// was produced so far, transcript included, when that state is valid.
pub fn run_all(cfg: &RunConfig) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let mut run = Run {
        cfg,
        session: cfg.open_session()?,
        bundle: RunBundle::default(),
        set: PropertySet::default(),
        design: None,
        net: None,
        rtl_src: String::new(),
        frozen: cfg.frozen_time.is_some(),
    };
    type Stage<'a> = (&'static str, fn(&mut Run<'a>) -> Result<(), PipelineError>);
    let stages: [Stage; 7] = [
        ("ingest", Run::ingest),
        ("rtl", Run::rtl),
        ("generation", Run::generate),
        ("syntax", Run::syntax),
        ("formal", |r| r.formal("formal", None)),
        ("cex", Run::cex),
        ("coverage", Run::coverage),
    ];
    for (name, f) in stages {
        let res = f(&mut run).and_then(|_| export_graph(&run.bundle).map(|_| ()).map_err(PipelineError::from));
        if let Err(e) = res {
            let saved = run.save().ok().map(|_| run.bundle.context.run_id.clone());
            return Err(PipelineError::Stage {
                stage: name,
                saved,
                source: Box::new(e),
            });
        }
    }
    let dir = run.save()?;
    let g = Graph::from_bundle(&run.bundle)?;
    let html = render_html(&g, &format!("kgfv run {}", run.bundle.context.run_id));
    let html_path = dir.join(HTML_FILE);
    fs::write(&html_path, html).map_err(|source| PipelineError::Io { path: html_path, source })?;
    Ok(RunOutcome {
        run_id: run.bundle.context.run_id.clone(),
        run_dir: dir,
        report: report(&run.bundle),
        bundle: run.bundle,
    })
}
