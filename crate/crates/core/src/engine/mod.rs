// SPDX-License-Identifier: Apache-2.0

//! Explicit-state checking of bound properties over an elaborated design.
//!
//! The search is a breadth-first walk of the product of design state,
//! property monitor and assumption monitors. Inputs are enumerated in
//! lexicographic order, so the first violation found is the shortest one
//! and, among those, the one with the least input sequence.

mod external;
mod monitor;

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{CoverageMetrics, DeadCode, DeadCodeClass, FormalResult, FormalStatus};
use crate::rtl::{NetModel, Program};
use crate::sva::{BoundProperty, PropKind};

pub use external::{import_external_results, map_external_status, EXTERNAL_STATUS_TABLE};
pub use monitor::{MonState, Monitor, StepOut};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("{prop_id}: signal '{name}' is not a net of the design")]
    Unbound { prop_id: String, name: String },
    #[error("search budget must be positive (max_states={max_states}, max_depth={max_depth})")]
    Budget { max_states: usize, max_depth: u32 },
    #[error("{prop_id}: clocked on '{clock}' but the design clock is '{expected}'")]
    Clock {
        prop_id: String,
        clock: String,
        expected: String,
    },
    #[error("{prop_id}: expected a {expected} directive")]
    Kind { prop_id: String, expected: &'static str },
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub max_states: usize,
    pub max_depth: u32,
    /// Input constraints; transitions that violate any of them are pruned.
    pub assumptions: Vec<BoundProperty>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            max_states: 1 << 20,
            max_depth: 64,
            assumptions: Vec::new(),
        }
    }
}

impl CheckConfig {
    fn validate(&self) -> Result<(), EngineError> {
        if self.max_states == 0 || self.max_depth == 0 {
            return Err(EngineError::Budget {
                max_states: self.max_states,
                max_depth: self.max_depth,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceCycle {
    pub inputs: Vec<u64>,
    /// Register values at the start of the cycle.
    pub state: Vec<u64>,
    /// Values of [`CexTrace::signals`] in this cycle.
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CexTrace {
    pub prop_id: String,
    /// Dumped signals as (hierarchical name, width): inputs, registers,
    /// then any other net the property reads.
    pub signals: Vec<(String, u32)>,
    pub cycles: Vec<TraceCycle>,
    pub failure_cycle: usize,
    pub violated_at_line: u32,
}

impl CexTrace {
    /// Values of one signal over the whole trace.
    pub fn column(&self, name: &str) -> Option<Vec<u64>> {
        let j = self.signals.iter().position(|(n, _)| n == name)?;
        Some(self.cycles.iter().map(|c| c.values[j]).collect())
    }
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub prop_id: String,
    pub status: FormalStatus,
    pub proof_depth: Option<u32>,
    pub runtime_ms: u64,
    /// Counterexample for assertions, witness for covers.
    pub trace: Option<CexTrace>,
    /// Distinct product states visited.
    pub states: usize,
    pub antecedent_matched: bool,
    pub message: Option<String>,
}

impl Verdict {
    fn error(prop_id: &str, e: &EngineError) -> Verdict {
        Verdict {
            prop_id: prop_id.to_string(),
            status: FormalStatus::Error,
            proof_depth: None,
            runtime_ms: 0,
            trace: None,
            states: 0,
            antecedent_matched: false,
            message: Some(e.to_string()),
        }
    }

    pub fn to_result(&self, result_id: &str, stage: &str, artifact_path: Option<String>) -> FormalResult {
        FormalResult {
            result_id: result_id.to_string(),
            prop_id: self.prop_id.clone(),
            status: self.status,
            proof_depth: self.proof_depth,
            runtime: self.runtime_ms,
            artifact_path,
            stage: stage.to_string(),
            stale: false,
            external: false,
            message: self.message.clone(),
        }
    }
}

struct Node {
    state: Vec<u64>,
    mons: Vec<MonState>,
    parent: u32,
    input: u32,
}

const ROOT: u32 = u32::MAX;

/// Shared breadth-first product exploration.
struct Search<'a> {
    net: &'a NetModel,
    next: Program,
    inputs: Vec<Vec<u64>>,
    /// Assumption monitors first, then the optional property monitor.
    mons: Vec<Monitor>,
    nodes: Vec<Node>,
    seen: HashMap<Vec<u64>, u32>,
    max_states: usize,
}

enum Visit {
    /// Keep going.
    Continue,
    /// Stop the search; the transition is recorded as the final one.
    Stop,
}

enum End {
    Stopped { node: u32, input: u32, cycle: u32 },
    Exhausted { levels: u32 },
    Budget { levels: u32 },
    Depth,
}


type Visitor<'a> = dyn FnMut(u32, &[u64], Option<&StepOut>) -> Visit + 'a;

impl<'a> Search<'a> {
    fn new(net: &'a NetModel, cfg: &CheckConfig, prop: Option<Monitor>) -> Result<Search<'a>, EngineError> {
        cfg.validate()?;
        let mut mons = Vec::new();
        for a in &cfg.assumptions {
            mons.push(Monitor::compile(net, a)?);
        }
        mons.extend(prop);
        Ok(Search {
            net,
            next: Program::compile(&net.next_state),
            inputs: net.input_valuations().collect(),
            mons,
            nodes: Vec::new(),
            seen: HashMap::new(),
            max_states: cfg.max_states,
        })
    }

    fn key(state: &[u64], mons: &[MonState]) -> Vec<u64> {
        let mut k = state.to_vec();
        for m in mons {
            m.encode(&mut k);
        }
        k
    }

    /// Explore up to `max_depth` cycles. `visit(cycle, slots, outs)` sees every
    /// transition that survives the assumptions, where `outs` holds the
    /// property monitor's step result when one is present.
    fn run(&mut self, max_depth: u32, n_assume: usize, visit: &mut Visitor) -> End {
        let init_mons: Vec<MonState> = self.mons.iter().map(Monitor::initial).collect();
        self.seen.insert(Self::key(&self.net.init, &init_mons), 0);
        self.nodes.push(Node {
            state: self.net.init.clone(),
            mons: init_mons,
            parent: ROOT,
            input: 0,
        });
        let mut frontier: Vec<u32> = vec![0];
        let mut slots = Vec::with_capacity(self.net.num_slots());
        let mut scratch = Vec::new();
        let mut mscratch = Vec::new();
        for cycle in 0..max_depth {
            let mut next_frontier = Vec::new();
            let mut over_budget = false;
            for &n in &frontier {
                for (ii, inp) in self.inputs.iter().enumerate() {
                    slots.clear();
                    slots.extend_from_slice(&self.nodes[n as usize].state);
                    slots.extend_from_slice(inp);
                    let mut new_mons = Vec::with_capacity(self.mons.len());
                    let mut pruned = false;
                    let mut prop_out = None;
                    for (k, m) in self.mons.iter().enumerate() {
                        let (ms, out) = m.step(&self.nodes[n as usize].mons[k], &mut slots, &mut mscratch);
                        if k < n_assume && out.failed {
                            pruned = true;
                            break;
                        }
                        if k >= n_assume {
                            prop_out = Some(out);
                        }
                        new_mons.push(ms);
                    }
                    if pruned {
                        continue;
                    }
                    if let Visit::Stop = visit(cycle, &slots, prop_out.as_ref()) {
                        return End::Stopped {
                            node: n,
                            input: ii as u32,
                            cycle,
                        };
                    }
                    if over_budget {
                        continue;
                    }
                    self.next.run(&slots, &mut scratch);
                    let state: Vec<u64> = (0..self.net.state.len()).map(|i| self.next.root(&scratch, i)).collect();
                    let key = Self::key(&state, &new_mons);
                    if self.seen.contains_key(&key) {
                        continue;
                    }
                    if self.seen.len() >= self.max_states {
                        over_budget = true;
                        continue;
                    }
                    let id = self.nodes.len() as u32;
                    self.seen.insert(key, id);
                    self.nodes.push(Node {
                        state,
                        mons: new_mons,
                        parent: n,
                        input: ii as u32,
                    });
                    next_frontier.push(id);
                }
            }
            if over_budget {
                return End::Budget { levels: cycle + 1 };
            }
            if next_frontier.is_empty() {
                return End::Exhausted { levels: cycle + 1 };
            }
            frontier = next_frontier;
        }
        End::Depth
    }

    /// Rebuild the cycle-by-cycle trace ending with `(node, input)`.
    fn trace(&self, node: u32, input: u32, prop: &BoundProperty, extra: &[String]) -> CexTrace {
        let mut path = vec![input];
        let mut states = Vec::new();
        let mut n = node;
        loop {
            let nd = &self.nodes[n as usize];
            states.push(nd.state.clone());
            if nd.parent == ROOT {
                break;
            }
            path.push(nd.input);
            n = nd.parent;
        }
        path.reverse();
        states.reverse();
        let net = self.net;
        let mut signals: Vec<(String, u32)> = net.inputs.iter().map(|v| (v.name.clone(), v.width)).collect();
        signals.extend(net.state.iter().map(|v| (v.name.clone(), v.width)));
        for s in extra {
            if !signals.iter().any(|(n, _)| n == s) {
                if let Some(e) = net.signal(s) {
                    signals.push((s.clone(), e.width()));
                }
            }
        }
        let exprs: Vec<_> = signals.iter().map(|(n, _)| net.signals[n].clone()).collect();
        let prog = Program::compile(&exprs);
        let mut scratch = Vec::new();
        let cycles = states
            .into_iter()
            .zip(path)
            .map(|(state, ii)| {
                let inputs = self.inputs[ii as usize].clone();
                let mut slots = state.clone();
                slots.extend_from_slice(&inputs);
                prog.run(&slots, &mut scratch);
                TraceCycle {
                    values: (0..exprs.len()).map(|j| prog.root(&scratch, j)).collect(),
                    inputs,
                    state,
                }
            })
            .collect::<Vec<_>>();
        CexTrace {
            prop_id: prop.prop_id.clone(),
            signals,
            failure_cycle: cycles.len() - 1,
            cycles,
            violated_at_line: prop.line,
        }
    }
}

fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

/// Check an assertion (or an assumption treated as one).
pub fn check(net: &NetModel, p: &BoundProperty, cfg: &CheckConfig) -> Result<Verdict, EngineError> {
    if p.kind == PropKind::Cover {
        return check_cover(net, p, cfg);
    }
    let t0 = Instant::now();
    let mon = Monitor::compile(net, p)?;
    let n_assume = cfg.assumptions.len();
    let mut search = Search::new(net, cfg, Some(mon.clone()))?;
    let mut ante = false;
    let end = search.run(cfg.max_depth, n_assume, &mut |_, _, out| {
        let out = out.expect("property monitor present");
        ante |= out.antecedent_matched;
        if out.failed {
            Visit::Stop
        } else {
            Visit::Continue
        }
    });
    let mut v = Verdict {
        prop_id: p.prop_id.clone(),
        status: FormalStatus::Bounded,
        proof_depth: None,
        runtime_ms: 0,
        trace: None,
        states: search.seen.len(),
        antecedent_matched: ante,
        message: None,
    };
    match end {
        End::Stopped { node, input, cycle } => {
            v.status = FormalStatus::Cex;
            v.proof_depth = Some(cycle);
            v.trace = Some(search.trace(node, input, p, &mon.signals));
        }
        End::Exhausted { levels } => {
            v.proof_depth = Some(levels);
            v.status = if mon.has_antecedent() && !ante {
                FormalStatus::Vacuous
            } else {
                FormalStatus::Proven
            };
        }
        End::Budget { levels } => {
            v.proof_depth = Some(levels);
            v.message = Some(format!("state budget of {} exhausted", cfg.max_states));
        }
        End::Depth => {
            v.proof_depth = Some(cfg.max_depth);
            v.message = Some(format!("depth budget of {} cycles exhausted", cfg.max_depth));
        }
    }
    v.runtime_ms = elapsed_ms(t0);
    Ok(v)
}

/// Search for a reachable match of a cover directive. Unsatisfiable covers
/// come back vacuous; budget-limited searches come back bounded.
pub fn check_cover(net: &NetModel, p: &BoundProperty, cfg: &CheckConfig) -> Result<Verdict, EngineError> {
    if p.kind != PropKind::Cover {
        return Err(EngineError::Kind {
            prop_id: p.prop_id.clone(),
            expected: "cover",
        });
    }
    let t0 = Instant::now();
    let mon = Monitor::compile(net, p)?;
    let mut search = Search::new(net, cfg, Some(mon.clone()))?;
    let mut ante = false;
    let end = search.run(cfg.max_depth, cfg.assumptions.len(), &mut |_, _, out| {
        let out = out.expect("property monitor present");
        ante |= out.antecedent_matched;
        if out.hit {
            Visit::Stop
        } else {
            Visit::Continue
        }
    });
    let mut v = Verdict {
        prop_id: p.prop_id.clone(),
        status: FormalStatus::Bounded,
        proof_depth: None,
        runtime_ms: 0,
        trace: None,
        states: search.seen.len(),
        antecedent_matched: ante,
        message: None,
    };
    match end {
        End::Stopped { node, input, cycle } => {
            v.status = FormalStatus::Proven;
            v.proof_depth = Some(cycle + 1);
            v.trace = Some(search.trace(node, input, p, &mon.signals));
        }
        End::Exhausted { levels } => {
            v.status = FormalStatus::Vacuous;
            v.proof_depth = Some(levels);
            v.message = Some("no reachable path satisfies the cover".into());
        }
        End::Budget { levels } => {
            v.proof_depth = Some(levels);
            v.message = Some(format!("state budget of {} exhausted", cfg.max_states));
        }
        End::Depth => {
            v.proof_depth = Some(cfg.max_depth);
            v.message = Some(format!("depth budget of {} cycles exhausted", cfg.max_depth));
        }
    }
    v.runtime_ms = elapsed_ms(t0);
    Ok(v)
}

fn check_or_error(net: &NetModel, p: &BoundProperty, cfg: &CheckConfig) -> Verdict {
    check(net, p, cfg).unwrap_or_else(|e| Verdict::error(&p.prop_id, &e))
}

/// Check every property; contract violations become `error` verdicts.
/// The result order is by prop_id regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn check_all(net: &NetModel, props: &[BoundProperty], cfg: &CheckConfig) -> Vec<Verdict> {
    use rayon::prelude::*;
    let mut out: Vec<Verdict> = props.par_iter().map(|p| check_or_error(net, p, cfg)).collect();
    out.sort_by(|a, b| a.prop_id.cmp(&b.prop_id));
    out
}

#[cfg(not(feature = "parallel"))]
pub fn check_all(net: &NetModel, props: &[BoundProperty], cfg: &CheckConfig) -> Vec<Verdict> {
    check_all_sequential(net, props, cfg)
}

/// Single-threaded [`check_all`], always available for comparison.
pub fn check_all_sequential(net: &NetModel, props: &[BoundProperty], cfg: &CheckConfig) -> Vec<Verdict> {
    let mut out: Vec<Verdict> = props.iter().map(|p| check_or_error(net, p, cfg)).collect();
    out.sort_by(|a, b| a.prop_id.cmp(&b.prop_id));
    out
}

/// Statement reachability under the configured assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct Reachability {
    pub covered: Vec<String>,
    pub unreachable: Vec<String>,
    /// A budget stopped the search; "unreachable" then means "not reached".
    pub partial: bool,
}

fn stmt_order(id: &str) -> (usize, &str) {
    (id.trim_start_matches('S').parse().unwrap_or(usize::MAX), id)
}

pub fn reachability(net: &NetModel, cfg: &CheckConfig) -> Result<Reachability, EngineError> {
    let ids: Vec<&String> = net.statement_guards.keys().collect();
    let guards: Vec<_> = net.statement_guards.values().cloned().collect();
    let prog = Program::compile(&guards);
    let mut hit = vec![false; ids.len()];
    let mut remaining = ids.len();
    let mut scratch = Vec::new();
    let mut search = Search::new(net, cfg, None)?;
    let end = search.run(cfg.max_depth, cfg.assumptions.len(), &mut |_, slots, _| {
        if remaining > 0 {
            prog.run(slots, &mut scratch);
            for (j, h) in hit.iter_mut().enumerate() {
                if !*h && prog.root(&scratch, j) != 0 {
                    *h = true;
                    remaining -= 1;
                }
            }
        }
        Visit::Continue
    });
    let partial = !matches!(end, End::Exhausted { .. }) && remaining > 0;
    let mut covered = Vec::new();
    let mut unreachable = Vec::new();
    for (id, h) in ids.into_iter().zip(hit) {
        if h {
            covered.push(id.clone());
        } else {
            unreachable.push(id.clone());
        }
    }
    covered.sort_by(|a, b| stmt_order(a).cmp(&stmt_order(b)));
    unreachable.sort_by(|a, b| stmt_order(a).cmp(&stmt_order(b)));
    Ok(Reachability {
        covered,
        unreachable,
        partial,
    })
}

/// Coverage metrics from reachability plus already computed verdicts.
pub fn coverage_from(reach: &Reachability, verdicts: &[Verdict], cov_id: &str, run_ref: &str) -> CoverageMetrics {
    CoverageMetrics {
        cov_id: cov_id.to_string(),
        run_ref: run_ref.to_string(),
        reachable_pct: CoverageMetrics::percent(reach.covered.len(), reach.unreachable.len()),
        covered_statements: reach.covered.clone(),
        unreachable_statements: reach.unreachable.clone(),
        dead_code: reach
            .unreachable
            .iter()
            .map(|s| DeadCode {
                statement: s.clone(),
                classification: DeadCodeClass::Gap,
            })
            .collect(),
        vacuity_count: verdicts.iter().filter(|v| v.status == FormalStatus::Vacuous).count() as u32,
        proof_core_ratio: None,
        partial: reach.partial,
        stage: String::new(),
        stale: false,
    }
}

/// Reachability plus vacuity over `props`, with default ids.
pub fn coverage(net: &NetModel, props: &[BoundProperty], cfg: &CheckConfig) -> Result<CoverageMetrics, EngineError> {
    let reach = reachability(net, cfg)?;
    let verdicts = check_all(net, props, cfg);
    Ok(coverage_from(&reach, &verdicts, "COV-001", ""))
}

#[cfg(test)]
mod tests;
