// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::*;
use crate::kg::SignalIndex;
use crate::rtl::{elaborate, parse_rtl};
use crate::sva::{bind, parse_properties};

const TOGGLE: &str = "module t(input clk, output reg x);\n always @(posedge clk) x <= ~x;\nendmodule\n";
const FIFO: &str = include_str!("../../tests/fixtures/fifo2.v");

fn setup(rtl: &str, top: &str, props: &str) -> (NetModel, Vec<BoundProperty>) {
    let d = parse_rtl(rtl).unwrap();
    let net = elaborate(&d, top, &BTreeMap::new()).unwrap();
    let idx = SignalIndex::from_design(&d.model);
    let src = format!("default clocking @(posedge clk); endclocking\n{props}");
    let f = parse_properties(&src).unwrap();
    (net, bind(&f, &d.model, &idx).unwrap())
}

fn one(rtl: &str, top: &str, prop: &str) -> (NetModel, BoundProperty) {
    let (n, mut p) = setup(rtl, top, &format!("P_1: {prop}\n"));
    (n, p.remove(0))
}

#[test]
fn toggle_alternates_proven() {
    let (n, p) = one(TOGGLE, "t", "assert property (x |-> ##1 !x);");
    let v = check(&n, &p, &CheckConfig::default()).unwrap();
    assert_eq!(v.status, FormalStatus::Proven);
    assert!(v.antecedent_matched);
    assert!(v.proof_depth.is_some());
}

#[test]
fn toggle_hold_fails_one_after_trigger() {
    let (n, p) = one(TOGGLE, "t", "assert property (x |-> ##1 x);");
    let v = check(&n, &p, &CheckConfig::default()).unwrap();
    assert_eq!(v.status, FormalStatus::Cex);
    let t = v.trace.unwrap();
    assert_eq!(t.failure_cycle, 2);
    assert_eq!(t.column("t.x").unwrap(), [0, 1, 0]);
    assert_eq!(t.violated_at_line, 2);
}

#[test]
fn unsatisfiable_antecedent_is_vacuous() {
    let (n, p) = one(TOGGLE, "t", "assert property ((x && !x) |-> x);");
    assert_eq!(check(&n, &p, &CheckConfig::default()).unwrap().status, FormalStatus::Vacuous);
}

#[test]
fn zero_budget_rejected() {
    let (n, p) = one(TOGGLE, "t", "assert property (x |-> ##1 !x);");
    let cfg = CheckConfig {
        max_depth: 0,
        ..Default::default()
    };
    assert!(matches!(check(&n, &p, &cfg), Err(EngineError::Budget { .. })));
}

#[test]
fn past_and_edges() {
    let (n, ps) = setup(
        TOGGLE,
        "t",
        "P_1: assert property ($rose(x) |-> $past(x) == 1'b0);\n\
         P_2: assert property (##1 $stable(x));\n\
         P_3: assert property ($fell(x) |=> x);\n",
    );
    let v = check_all(&n, &ps, &CheckConfig::default());
    assert_eq!(v[0].status, FormalStatus::Proven);
    assert_eq!(v[1].status, FormalStatus::Cex);
    assert_eq!(v[2].status, FormalStatus::Proven);
}

#[test]
fn ranged_delay_uses_earliest_match() {
    let (n, p) = one(TOGGLE, "t", "assert property (!x |-> ##[1:2] !x);");
    assert_eq!(check(&n, &p, &CheckConfig::default()).unwrap().status, FormalStatus::Proven);
    let (n, p) = one(TOGGLE, "t", "assert property (!x |-> ##[0:1] !x ##1 !x);");
    let v = check(&n, &p, &CheckConfig::default()).unwrap();
    assert_eq!(v.status, FormalStatus::Cex);
    // both the ##0 and the ##1 alternative die at cycle 1
    assert_eq!(v.trace.unwrap().failure_cycle, 1);
}

#[test]
fn fifo_cover_full_needs_two_writes() {
    let (n, p) = one(FIFO, "fifo2", "cover property (full);");
    let v = check_cover(&n, &p, &CheckConfig::default()).unwrap();
    assert_eq!(v.status, FormalStatus::Proven);
    let t = v.trace.unwrap();
    assert_eq!(t.cycles.len(), 3);
    assert_eq!(t.column("fifo2.full").unwrap(), [0, 0, 1]);

    let (n, p) = one(FIFO, "fifo2", "cover property (full && empty);");
    assert_eq!(check_cover(&n, &p, &CheckConfig::default()).unwrap().status, FormalStatus::Vacuous);

    let cfg = CheckConfig {
        max_depth: 1,
        ..Default::default()
    };
    assert_eq!(check_cover(&n, &p, &cfg).unwrap().status, FormalStatus::Bounded);
}

#[test]
fn fifo_reset_guard() {
    let (n, ps) = setup(
        FIFO,
        "fifo2",
        "P_1: assert property (full |=> !empty);\n\
         P_2: assert property (disable iff (rst) full |=> !empty);\n",
    );
    let v = check_all(&n, &ps, &CheckConfig::default());
    assert_eq!(v[0].status, FormalStatus::Cex);
    assert_eq!(v[1].status, FormalStatus::Proven);
    let t = v[0].trace.as_ref().unwrap();
    assert_eq!(t.column("fifo2.rst").unwrap().iter().filter(|&&r| r == 1).count(), 1);
}

#[test]
fn assumptions_prune_inputs() {
    let (n, ps) = setup(FIFO, "fifo2", "P_1: assert property (empty);\nA_1: assume property (!wr_en);\n");
    let cfg = CheckConfig {
        assumptions: vec![ps[1].clone()],
        ..Default::default()
    };
    assert_eq!(check(&n, &ps[0], &cfg).unwrap().status, FormalStatus::Proven);
    assert_eq!(check(&n, &ps[0], &CheckConfig::default()).unwrap().status, FormalStatus::Cex);
}

#[test]
fn fifo_full_reachability_and_assumption() {
    let (n, ps) = setup(FIFO, "fifo2", "A_1: assume property (!wr_en);\n");
    let r = reachability(&n, &CheckConfig::default()).unwrap();
    assert!(r.unreachable.is_empty(), "{:?}", r.unreachable);
    assert!(!r.partial);
    let cfg = CheckConfig {
        assumptions: ps,
        ..Default::default()
    };
    let r2 = reachability(&n, &cfg).unwrap();
    assert!(!r2.unreachable.is_empty());
    assert!(r2.covered.iter().all(|s| r.covered.contains(s)));
}

#[test]
fn constant_false_arm_unreachable() {
    let rtl = "module d(input clk, input a, output reg q);\n always @(posedge clk) begin\n  if (1'b0)\n   q <= a;\n  else\n   q <= ~a;\n end\nendmodule\n";
    let (n, _) = setup(rtl, "d", "");
    let m = coverage(&n, &[], &CheckConfig::default()).unwrap();
    // the dead arm and the assignment inside it
    assert_eq!(m.unreachable_statements, ["S1", "S2"]);
    assert_eq!(m.dead_code[0].classification, DeadCodeClass::Gap);
    assert!((m.reachable_pct - CoverageMetrics::percent(m.covered_statements.len(), 2)).abs() < 1e-9);
}

#[test]
fn state_budget_gives_bounded() {
    let (n, p) = one(FIFO, "fifo2", "assert property (!(full && empty));");
    let cfg = CheckConfig {
        max_states: 3,
        ..Default::default()
    };
    let v = check(&n, &p, &cfg).unwrap();
    assert_eq!(v.status, FormalStatus::Bounded);
    assert!(v.proof_depth.unwrap() >= 1);
}

#[test]
fn parallel_and_sequential_agree() {
    let (n, ps) = setup(
        FIFO,
        "fifo2",
        "P_2: assert property (full |=> !empty);\nP_1: assert property (empty |-> !full);\nC_1: cover property (full);\n",
    );
    let a = check_all(&n, &ps, &CheckConfig::default());
    let b = check_all_sequential(&n, &ps, &CheckConfig::default());
    let strip = |v: &[Verdict]| v.iter().map(|x| (x.prop_id.clone(), x.status, x.trace.clone())).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a.iter().map(|v| v.prop_id.as_str()).collect::<Vec<_>>(), ["C-1", "P-1", "P-2"]);
}
