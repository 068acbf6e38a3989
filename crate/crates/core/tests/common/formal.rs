// SPDX-License-Identifier: Apache-2.0

//! Cross-checks engine verdicts on generated designs against the window
//! oracle in [`super::design`].

use std::collections::BTreeMap;

use kgfv_core::engine::{check, CheckConfig, Verdict};
use kgfv_core::ir::FormalStatus;
use kgfv_core::kg::SignalIndex;
use kgfv_core::rtl::{elaborate, parse_rtl, NetModel};
use kgfv_core::sva::{bind, parse_properties, BoundProperty, PropKind};

use rand::rngs::StdRng;
use rand::Rng;

use super::design::{gen_assumption, gen_design, gen_prop, oracle, replay, Design, Oracle, Prop, SigKind, E};

pub const DEPTH: u32 = 16;
pub const ORACLE_STATES: usize = 400_000;

pub struct Case {
    pub net: NetModel,
    pub props: Vec<BoundProperty>,
    pub assumptions: Vec<BoundProperty>,
}

pub fn property_text(d: &Design, props: &[Prop], assumes: &[E]) -> String {
    let mut out = String::new();
    for (k, p) in props.iter().enumerate() {
        out.push_str(&p.render(&format!("P_{}", k + 1), &d.sigs));
        out.push('\n');
    }
    for (k, a) in assumes.iter().enumerate() {
        out.push_str(&format!("A_{}: assume property (@(posedge clk) {});\n", k + 1, a.render(&d.sigs)));
    }
    out
}

pub fn build(d: &Design, props: &[Prop], assumes: &[E]) -> Result<Case, String> {
    let rtl = d.verilog();
    let parsed = parse_rtl(&rtl).map_err(|e| format!("{e:?}\n{rtl}"))?;
    let net = elaborate(&parsed, "dut", &BTreeMap::new()).map_err(|e| format!("{e}\n{rtl}"))?;
    let idx = SignalIndex::from_design(&parsed.model);
    let src = property_text(d, props, assumes);
    let f = parse_properties(&src).map_err(|e| format!("{e:?}\n{src}"))?;
    let bound = bind(&f, &parsed.model, &idx).map_err(|e| format!("{e}\n{src}"))?;
    let (assumptions, props) = bound.into_iter().partition(|p| p.kind == PropKind::Assumption);
    Ok(Case { net, props, assumptions })
}

fn leaf(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

/// Trace columns reordered into the generator's input and register order.
fn trace_vectors(d: &Design, net: &NetModel, v: &Verdict) -> (Vec<Vec<u64>>, Vec<Vec<u64>>) {
    let t = v.trace.as_ref().expect("trace");
    let ins: Vec<usize> = d
        .of_kind(SigKind::Input)
        .iter()
        .map(|&i| net.inputs.iter().position(|n| leaf(&n.name) == d.sigs[i].name).expect("input"))
        .collect();
    let regs: Vec<usize> = d
        .of_kind(SigKind::Reg)
        .iter()
        .map(|&r| net.state.iter().position(|n| leaf(&n.name) == d.sigs[r].name).expect("register"))
        .collect();
    let inputs = t.cycles.iter().map(|c| ins.iter().map(|&k| c.inputs[k]).collect()).collect();
    let states = t.cycles.iter().map(|c| regs.iter().map(|&k| c.state[k]).collect()).collect();
    (inputs, states)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub checked: usize,
    pub agreed: usize,
    pub cex: usize,
    pub proven: usize,
    pub vacuous: usize,
    pub bounded: usize,
    pub oracle_gave_up: usize,
}

/// Compares one verdict with the oracle. `Err` carries the disagreement.
pub fn compare(d: &Design, p: &Prop, o: &Oracle, assumes: &[E], case: &Case, v: &Verdict, tally: &mut Tally) -> Result<(), String> {
    tally.checked += 1;
    let event = if p.cover { o.first_hit } else { o.first_fail };
    let ok = match v.status {
        FormalStatus::Cex if !p.cover => {
            tally.cex += 1;
            let t = v.trace.as_ref().ok_or("cex without trace")?;
            let (inputs, states) = trace_vectors(d, &case.net, v);
            let f = replay(d, p, assumes, &inputs, &states)?;
            if !f.fail {
                return Err("trace does not violate the property at its last cycle".into());
            }
            event == v.proof_depth && t.failure_cycle as u32 + 1 == t.cycles.len() as u32 && event == Some(t.failure_cycle as u32)
        }
        FormalStatus::Proven if p.cover => {
            tally.proven += 1;
            let (inputs, states) = trace_vectors(d, &case.net, v);
            let f = replay(d, p, assumes, &inputs, &states)?;
            f.hit && event.map(|c| c + 1) == v.proof_depth && inputs.len() as u32 == v.proof_depth.unwrap_or(0)
        }
        FormalStatus::Proven => {
            tally.proven += 1;
            event.is_none() && (p.ante.is_none() || o.ante_ever)
        }
        FormalStatus::Vacuous if p.cover => {
            tally.vacuous += 1;
            event.is_none()
        }
        FormalStatus::Vacuous => {
            tally.vacuous += 1;
            event.is_none() && p.ante.is_some() && !o.ante_ever
        }
        FormalStatus::Bounded => {
            tally.bounded += 1;
            event.is_none_or(|c| c >= DEPTH)
        }
        _ => false,
    };
    if ok {
        tally.agreed += 1;
        Ok(())
    } else {
        Err(format!(
            "engine {:?} depth {:?}, oracle fail {:?} hit {:?} ante {}",
            v.status, v.proof_depth, o.first_fail, o.first_hit, o.ante_ever
        ))
    }
}

pub fn config(case: &Case) -> CheckConfig {
    CheckConfig {
        max_states: 1 << 20,
        max_depth: DEPTH,
        assumptions: case.assumptions.clone(),
    }
}

/// A design, its assumptions, and properties whose oracle exploration
/// closes within [`ORACLE_STATES`]. Properties over larger windows of free
/// inputs are redrawn.
pub fn gen_case(rng: &mut StdRng, state_bits: u32, n_props: usize, tally: &mut Tally) -> (Design, Vec<(Prop, Oracle)>, Vec<E>) {
    let d = gen_design(rng, state_bits);
    let assumes: Vec<E> = if rng.gen_bool(0.3) { vec![gen_assumption(rng, &d, false)] } else { vec![] };
    let mut props = Vec::new();
    while props.len() < n_props {
        let p = gen_prop(rng, &d);
        match oracle(&d, &p, &assumes, ORACLE_STATES) {
            Some(o) => props.push((p, o)),
            None => tally.oracle_gave_up += 1,
        }
    }
    (d, props, assumes)
}

pub fn run_case(d: &Design, cases: &[(Prop, Oracle)], assumes: &[E], tally: &mut Tally) -> Vec<String> {
    let props: Vec<Prop> = cases.iter().map(|c| c.0.clone()).collect();
    let props = &props[..];
    let case = match build(d, props, assumes) {
        Ok(c) => c,
        Err(e) => return vec![format!("build: {e}")],
    };
    let cfg = config(&case);
    let mut errs = Vec::new();
    for ((p, o), bp) in cases.iter().zip(&case.props) {
        let v = match check(&case.net, bp, &cfg) {
            Ok(v) => v,
            Err(e) => {
                errs.push(format!("engine: {e}"));
                continue;
            }
        };
        if let Err(e) = compare(d, p, o, assumes, &case, &v, tally) {
            errs.push(format!("{e}\n{}{}", d.verilog(), property_text(d, std::slice::from_ref(p), assumes)));
        }
    }
    errs
}
