// SPDX-License-Identifier: Apache-2.0

//! Property monitors: bounded sequence automata over token sets, plus
//! history registers for `$past`, `$rose`, `$fell` and `$stable`.

use std::collections::{BTreeMap, BTreeSet};

use crate::rtl::{NetExpr, NetModel, Program};
use crate::sva::{BoundProperty, Delay, Implication, PropKind, Sequence};
use crate::syntax::expr::min_width;
use crate::syntax::{BinaryOp, Expr, SysFunc};

use super::EngineError;

/// `(element index, cycles waited)` packed into one word.
type Token = u32;

fn token(elem: usize, waited: u32) -> Token {
    ((elem as u32) << 16) | waited
}

fn untoken(t: Token) -> (usize, u32) {
    ((t >> 16) as usize, t & 0xffff)
}

#[derive(Debug, Clone)]
struct SeqM {
    roots: Vec<usize>,
    delays: Vec<Delay>,
}

impl SeqM {
    /// Advance a token set through one cycle. Returns the tokens entering
    /// the next cycle and whether the sequence completed in this cycle.
    fn advance(&self, tokens: &[Token], holds: &dyn Fn(usize) -> bool) -> (Vec<Token>, bool) {
        let mut seen: BTreeSet<Token> = tokens.iter().copied().collect();
        let mut work: Vec<Token> = seen.iter().copied().collect();
        let mut next = BTreeSet::new();
        let mut matched = false;
        let last = self.roots.len() - 1;
        while let Some(t) = work.pop() {
            let (i, w) = untoken(t);
            let d = self.delays[i];
            if w >= d.min && w <= d.max && holds(self.roots[i]) {
                if i == last {
                    matched = true;
                } else {
                    let nt = token(i + 1, 0);
                    if seen.insert(nt) {
                        work.push(nt);
                    }
                }
            }
            if w < d.max {
                next.insert(token(i, w + 1));
            }
        }
        (next.into_iter().collect(), matched)
    }
}

/// Per-monitor state carried between cycles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MonState {
    /// Past values of history probes, most recent first within each probe.
    pub hist: Vec<u64>,
    /// Antecedent threads.
    pub ante: Vec<Token>,
    /// Outstanding consequent obligations, each a token set.
    pub obls: Vec<Vec<Token>>,
}

impl MonState {
    pub fn encode(&self, out: &mut Vec<u64>) {
        out.extend_from_slice(&self.hist);
        out.push(self.ante.len() as u64);
        out.extend(self.ante.iter().map(|&t| t as u64));
        out.push(self.obls.len() as u64);
        for o in &self.obls {
            out.push(o.len() as u64);
            out.extend(o.iter().map(|&t| t as u64));
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepOut {
    /// An obligation could no longer be met in this cycle.
    pub failed: bool,
    /// A consequent (or, for covers, the whole property) completed.
    pub hit: bool,
    pub antecedent_matched: bool,
}

#[derive(Debug, Clone)]
struct Probe {
    root: usize,
    offset: usize,
    depth: usize,
}

/// A compiled monitor for one bound property.
#[derive(Debug, Clone)]
pub struct Monitor {
    pub prop_id: String,
    pub kind: PropKind,
    prog: Program,
    base: usize,
    n_hist: usize,
    probes: Vec<Probe>,
    disable: Option<usize>,
    ante: Option<(SeqM, Implication)>,
    cons: SeqM,
    /// Signal paths the property reads.
    pub signals: Vec<String>,
}

impl Monitor {
    pub fn compile(net: &NetModel, p: &BoundProperty) -> Result<Monitor, EngineError> {
        if let Some(c) = &net.clock {
            let expected = format!("{}.{c}", net.top);
            if p.clock != expected {
                return Err(EngineError::Clock {
                    prop_id: p.prop_id.clone(),
                    clock: p.clock.clone(),
                    expected,
                });
            }
        }
        let mut lw = Lowerer {
            net,
            prop_id: &p.prop_id,
            probes: BTreeMap::new(),
            probe_order: Vec::new(),
            signals: BTreeSet::new(),
        };
        // first pass sizes the history buffers
        for e in p.ast.exprs() {
            lw.collect(e);
        }
        let mut offsets = BTreeMap::new();
        let mut n_hist = 0;
        for key in &lw.probe_order {
            offsets.insert(key.clone(), n_hist);
            n_hist += lw.probes[key].1;
        }
        let base = net.num_slots();
        let mut roots: Vec<NetExpr> = Vec::new();
        let push = |e: NetExpr, roots: &mut Vec<NetExpr>| {
            roots.push(e);
            roots.len() - 1
        };
        let disable = match &p.ast.disable {
            Some(d) => Some(push(lw.lower(d, base, &offsets)?.to_bool(), &mut roots)),
            None => None,
        };
        let seq = |s: &Sequence, lw: &mut Lowerer, roots: &mut Vec<NetExpr>| -> Result<SeqM, EngineError> {
            let mut r = Vec::new();
            for el in &s.0 {
                let e = lw.lower(&el.expr, base, &offsets)?.to_bool();
                r.push(push(e, roots));
            }
            Ok(SeqM {
                roots: r,
                delays: s.0.iter().map(|e| e.delay).collect(),
            })
        };
        let ante = match &p.ast.antecedent {
            Some((s, k)) => Some((seq(s, &mut lw, &mut roots)?, *k)),
            None => None,
        };
        let cons = seq(&p.ast.consequent, &mut lw, &mut roots)?;
        let mut probes = Vec::new();
        for key in lw.probe_order.clone() {
            let (expr, depth) = lw.probes[&key].clone();
            let e = lw.lower(&expr, base, &offsets)?;
            probes.push(Probe {
                root: push(e, &mut roots),
                offset: offsets[&key],
                depth,
            });
        }
        Ok(Monitor {
            prop_id: p.prop_id.clone(),
            kind: p.kind,
            prog: Program::compile(&roots),
            base,
            n_hist,
            probes,
            disable,
            ante,
            cons,
            signals: lw.signals.into_iter().collect(),
        })
    }

    pub fn has_antecedent(&self) -> bool {
        self.ante.is_some()
    }

    pub fn initial(&self) -> MonState {
        MonState {
            hist: vec![0; self.n_hist],
            ante: Vec::new(),
            obls: Vec::new(),
        }
    }

    /// Evaluate one cycle. `slots` holds state then inputs; it is extended
    /// in place with the history values and restored on return.
    pub fn step(&self, m: &MonState, slots: &mut Vec<u64>, scratch: &mut Vec<u64>) -> (MonState, StepOut) {
        debug_assert_eq!(slots.len(), self.base);
        slots.extend_from_slice(&m.hist);
        self.prog.run(slots, scratch);
        slots.truncate(self.base);
        let holds = |root: usize| self.prog.root(scratch, root) != 0;

        let mut hist = m.hist.clone();
        for p in &self.probes {
            let buf = &mut hist[p.offset..p.offset + p.depth];
            buf.rotate_right(1);
            buf[0] = self.prog.root(scratch, p.root);
        }
        let mut out = StepOut::default();
        if self.disable.is_some_and(holds) {
            return (
                MonState {
                    hist,
                    ante: Vec::new(),
                    obls: Vec::new(),
                },
                out,
            );
        }

        let mut start_now = self.ante.is_none();
        let mut start_next = false;
        let mut ante = Vec::new();
        if let Some((seq, kind)) = &self.ante {
            let mut tokens = m.ante.clone();
            tokens.push(token(0, 0));
            let (next, matched) = seq.advance(&tokens, &holds);
            ante = next;
            out.antecedent_matched = matched;
            match kind {
                Implication::Overlapped => start_now = matched,
                Implication::NonOverlapped => start_next = matched,
            }
        }

        let cover = self.kind == PropKind::Cover;
        let mut obls: BTreeSet<Vec<Token>> = BTreeSet::new();
        let fresh = vec![token(0, 0)];
        let pending = m.obls.iter().chain(start_now.then_some(&fresh));
        let mut merged: BTreeSet<Token> = BTreeSet::new();
        for ob in pending {
            let (next, matched) = self.cons.advance(ob, &holds);
            if matched {
                out.hit = true;
                continue;
            }
            if next.is_empty() {
                out.failed = true;
                continue;
            }
            if cover {
                merged.extend(next);
            } else {
                obls.insert(next);
            }
        }
        if start_next {
            if cover {
                merged.insert(token(0, 0));
            } else {
                obls.insert(fresh);
            }
        }
        if cover && !merged.is_empty() {
            obls.insert(merged.into_iter().collect());
        }
        (
            MonState {
                hist,
                ante,
                obls: obls.into_iter().collect(),
            },
            out,
        )
    }
}

struct Lowerer<'a> {
    net: &'a NetModel,
    prop_id: &'a str,
    /// Probe expression (printed) -> (expression, history depth).
    probes: BTreeMap<String, (Expr, usize)>,
    probe_order: Vec<String>,
    signals: BTreeSet<String>,
}

impl Lowerer<'_> {
    fn collect(&mut self, e: &Expr) {
        e.walk(&mut |x| {
            if let Expr::Call { func, args, .. } = x {
                let depth = match (func, args.get(1)) {
                    (SysFunc::Past, Some(Expr::Number { value, .. })) => *value as usize,
                    _ => 1,
                };
                let key = args[0].to_string();
                match self.probes.get_mut(&key) {
                    Some((_, d)) => *d = (*d).max(depth),
                    None => {
                        self.probes.insert(key.clone(), (args[0].clone(), depth));
                        self.probe_order.push(key);
                    }
                }
            }
        });
    }

    fn hist_slot(&self, arg: &Expr, back: usize, base: usize, offsets: &BTreeMap<String, usize>, width: u32) -> NetExpr {
        let key = arg.to_string();
        NetExpr::slot(base + offsets[&key] + back - 1, width)
    }

    fn lower(&mut self, e: &Expr, base: usize, offsets: &BTreeMap<String, usize>) -> Result<NetExpr, EngineError> {
        Ok(match e {
            Expr::Number { value, width } => NetExpr::konst(*value, width.unwrap_or_else(|| min_width(*value))),
            Expr::Ident { path, .. } => {
                let name = path.join(".");
                let v = self.net.signal(&name).cloned().ok_or_else(|| EngineError::Unbound {
                    prop_id: self.prop_id.to_string(),
                    name: name.clone(),
                })?;
                self.signals.insert(name);
                v
            }
            Expr::Macro { name, .. } => {
                return Err(EngineError::Unbound {
                    prop_id: self.prop_id.to_string(),
                    name: format!("`{name}"),
                })
            }
            Expr::Unary { op, arg } => NetExpr::unary(*op, self.lower(arg, base, offsets)?),
            Expr::Binary { op, lhs, rhs } => {
                let a = self.lower(lhs, base, offsets)?;
                let b = self.lower(rhs, base, offsets)?;
                NetExpr::binary(*op, a, b)
            }
            Expr::Ternary { cond, then, els } => {
                let c = self.lower(cond, base, offsets)?;
                let t = self.lower(then, base, offsets)?;
                let f = self.lower(els, base, offsets)?;
                NetExpr::mux(c, t, f)
            }
            Expr::Concat(items) => {
                let mut parts = Vec::new();
                for i in items {
                    parts.push(self.lower(i, base, offsets)?);
                }
                NetExpr::concat(parts)
            }
            Expr::Select { base: b, msb, lsb } => {
                let v = self.lower(b, base, offsets)?;
                let num = |x: &Expr| match x {
                    Expr::Number { value, .. } => Some(*value as u32),
                    _ => None,
                };
                let hi = num(msb);
                let lo = match lsb {
                    Some(l) => num(l),
                    None => hi,
                };
                match (hi, lo) {
                    (Some(h), Some(l)) if l <= h && h < v.width() => NetExpr::slice(v, l, h - l + 1),
                    _ => {
                        return Err(EngineError::Unbound {
                            prop_id: self.prop_id.to_string(),
                            name: e.to_string(),
                        })
                    }
                }
            }
            Expr::Call { func, args, .. } => {
                let now = self.lower(&args[0], base, offsets)?;
                let w = now.width();
                match func {
                    SysFunc::Past => {
                        let n = match args.get(1) {
                            Some(Expr::Number { value, .. }) => *value as usize,
                            _ => 1,
                        };
                        self.hist_slot(&args[0], n, base, offsets, w)
                    }
                    SysFunc::Rose | SysFunc::Fell => {
                        let prev = NetExpr::slice(self.hist_slot(&args[0], 1, base, offsets, w), 0, 1);
                        let cur = NetExpr::slice(now, 0, 1);
                        if *func == SysFunc::Rose {
                            NetExpr::and(cur, NetExpr::not(prev))
                        } else {
                            NetExpr::and(NetExpr::not(cur), prev)
                        }
                    }
                    SysFunc::Stable => {
                        let prev = self.hist_slot(&args[0], 1, base, offsets, w);
                        NetExpr::binary(BinaryOp::Eq, now, prev)
                    }
                }
            }
        })
    }
}
