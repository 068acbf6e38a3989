// SPDX-License-Identifier: Apache-2.0

//! Width-annotated expression DAGs over state and input slots, and the
//! flattened transition system built from them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::syntax::expr::mask;
use crate::syntax::{BinaryOp, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NetOp {
    Const(u64),
    /// State slots come first, then input slots.
    Slot(usize),
    Unary(UnaryOp, NetExpr),
    /// Operands of bitwise, arithmetic and comparison operators already share a width.
    Binary(BinaryOp, NetExpr, NetExpr),
    Mux(NetExpr, NetExpr, NetExpr),
    /// Most significant part first.
    Concat(Vec<NetExpr>),
    /// Bits `[lo + width - 1 : lo]` of the operand.
    Slice(NetExpr, u32),
    Zext(NetExpr),
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub struct NetNode {
    pub width: u32,
    pub op: NetOp,
}

/// Shared, immutable expression node.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NetExpr(Arc<NetNode>);

impl fmt::Debug for NetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}", self.0.op, self.0.width)
    }
}

impl NetExpr {
    fn new(width: u32, op: NetOp) -> NetExpr {
        NetExpr(Arc::new(NetNode { width, op }))
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub fn op(&self) -> &NetOp {
        &self.0.op
    }

    pub fn konst(value: u64, width: u32) -> NetExpr {
        NetExpr::new(width, NetOp::Const(value & mask(width)))
    }

    pub fn slot(slot: usize, width: u32) -> NetExpr {
        NetExpr::new(width, NetOp::Slot(slot))
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.op() {
            NetOp::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        self.as_const() == Some(1) && self.width() == 1
    }

    pub fn is_false(&self) -> bool {
        self.as_const() == Some(0)
    }

    pub fn zext(self, width: u32) -> NetExpr {
        debug_assert!(width >= self.width());
        if width == self.width() {
            return self;
        }
        if let Some(v) = self.as_const() {
            return NetExpr::konst(v, width);
        }
        NetExpr::new(width, NetOp::Zext(self))
    }

    /// Nonzero test, width 1.
    pub fn to_bool(self) -> NetExpr {
        if self.width() == 1 {
            self
        } else {
            NetExpr::unary(UnaryOp::RedOr, self)
        }
    }

    pub fn unary(op: UnaryOp, a: NetExpr) -> NetExpr {
        let width = match op {
            UnaryOp::Not | UnaryOp::Neg => a.width(),
            _ => 1,
        };
        if let Some(v) = a.as_const() {
            return NetExpr::konst(eval_unary(op, v, a.width()), width);
        }
        if op == UnaryOp::LogNot || op == UnaryOp::Not && width == 1 {
            if let NetOp::Unary(UnaryOp::LogNot | UnaryOp::Not, inner) = a.op() {
                if inner.width() == 1 {
                    return inner.clone();
                }
            }
        }
        NetExpr::new(width, NetOp::Unary(op, a))
    }

    /// Applies the width rules: bitwise and arithmetic operands are
    /// zero-extended to the wider operand; comparisons produce one bit;
    /// logical operators test for nonzero; shifts keep the left width.
    pub fn binary(op: BinaryOp, a: NetExpr, b: NetExpr) -> NetExpr {
        match op {
            BinaryOp::LogAnd | BinaryOp::LogOr => {
                let (a, b) = (a.to_bool(), b.to_bool());
                match (op, a.as_const(), b.as_const()) {
                    (BinaryOp::LogAnd, Some(0), _) | (BinaryOp::LogAnd, _, Some(0)) => {
                        return NetExpr::konst(0, 1)
                    }
                    (BinaryOp::LogOr, Some(1), _) | (BinaryOp::LogOr, _, Some(1)) => return NetExpr::konst(1, 1),
                    (BinaryOp::LogAnd, Some(1), _) | (BinaryOp::LogOr, Some(0), _) => return b,
                    (BinaryOp::LogAnd, _, Some(1)) | (BinaryOp::LogOr, _, Some(0)) => return a,
                    _ => {}
                }
                NetExpr::new(1, NetOp::Binary(op, a, b))
            }
            BinaryOp::Shl | BinaryOp::Shr => {
                let w = a.width();
                if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
                    return NetExpr::konst(eval_binary(op, x, y, w), w);
                }
                NetExpr::new(w, NetOp::Binary(op, a, b))
            }
            _ => {
                let w = a.width().max(b.width());
                let (a, b) = (a.zext(w), b.zext(w));
                let rw = if op.is_comparison() { 1 } else { w };
                if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
                    return NetExpr::konst(eval_binary(op, x, y, w), rw);
                }
                NetExpr::new(rw, NetOp::Binary(op, a, b))
            }
        }
    }

    pub fn and(a: NetExpr, b: NetExpr) -> NetExpr {
        NetExpr::binary(BinaryOp::LogAnd, a, b)
    }

    pub fn or(a: NetExpr, b: NetExpr) -> NetExpr {
        NetExpr::binary(BinaryOp::LogOr, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: NetExpr) -> NetExpr {
        NetExpr::unary(UnaryOp::LogNot, a.to_bool())
    }

    pub fn mux(c: NetExpr, t: NetExpr, f: NetExpr) -> NetExpr {
        let c = c.to_bool();
        let w = t.width().max(f.width());
        let (t, f) = (t.zext(w), f.zext(w));
        match c.as_const() {
            Some(1) => return t,
            Some(_) => return f,
            None => {}
        }
        if t == f {
            return t;
        }
        NetExpr::new(w, NetOp::Mux(c, t, f))
    }

    pub fn concat(parts: Vec<NetExpr>) -> NetExpr {
        let w = parts.iter().map(NetExpr::width).sum();
        if parts.iter().all(|p| p.as_const().is_some()) {
            let mut v = 0u64;
            for p in &parts {
                v = (v << p.width()) | p.as_const().unwrap();
            }
            return NetExpr::konst(v, w);
        }
        NetExpr::new(w, NetOp::Concat(parts))
    }

    pub fn slice(a: NetExpr, lo: u32, width: u32) -> NetExpr {
        debug_assert!(lo + width <= a.width());
        if lo == 0 && width == a.width() {
            return a;
        }
        if let Some(v) = a.as_const() {
            return NetExpr::konst(v >> lo, width);
        }
        NetExpr::new(width, NetOp::Slice(a, lo))
    }

    /// Direct recursive evaluation; use [`Program`] on hot paths.
    pub fn eval(&self, slots: &[u64]) -> u64 {
        let w = self.width();
        let v = match self.op() {
            NetOp::Const(v) => *v,
            NetOp::Slot(i) => slots[*i],
            NetOp::Unary(op, a) => eval_unary(*op, a.eval(slots), a.width()),
            NetOp::Binary(op, a, b) => eval_binary(*op, a.eval(slots), b.eval(slots), a.width()),
            NetOp::Mux(c, t, f) => {
                if c.eval(slots) != 0 {
                    t.eval(slots)
                } else {
                    f.eval(slots)
                }
            }
            NetOp::Concat(parts) => parts.iter().fold(0u64, |acc, p| {
                (acc.checked_shl(p.width()).unwrap_or(0)) | p.eval(slots)
            }),
            NetOp::Slice(a, lo) => a.eval(slots) >> lo,
            NetOp::Zext(a) => a.eval(slots),
        };
        v & mask(w)
    }

    /// Slots this expression reads.
    pub fn support(&self) -> Vec<usize> {
        let mut seen = std::collections::HashSet::new();
        let mut out = std::collections::BTreeSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(Arc::as_ptr(&e.0)) {
                continue;
            }
            match e.op() {
                NetOp::Const(_) => {}
                NetOp::Slot(i) => {
                    out.insert(*i);
                }
                NetOp::Unary(_, a) | NetOp::Slice(a, _) | NetOp::Zext(a) => stack.push(a.clone()),
                NetOp::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                NetOp::Mux(c, t, f) => {
                    stack.push(c.clone());
                    stack.push(t.clone());
                    stack.push(f.clone());
                }
                NetOp::Concat(ps) => stack.extend(ps.iter().cloned()),
            }
        }
        out.into_iter().collect()
    }
}

pub fn eval_unary(op: UnaryOp, v: u64, width: u32) -> u64 {
    let m = mask(width);
    match op {
        UnaryOp::Not => !v & m,
        UnaryOp::Neg => v.wrapping_neg() & m,
        UnaryOp::LogNot => (v & m == 0) as u64,
        UnaryOp::RedAnd => (v & m == m) as u64,
        UnaryOp::RedOr => (v & m != 0) as u64,
        UnaryOp::RedXor => ((v & m).count_ones() & 1) as u64,
    }
}

/// `width` is the operand width (both operands share it except for shifts).
pub fn eval_binary(op: BinaryOp, a: u64, b: u64, width: u32) -> u64 {
    let m = mask(width);
    match op {
        BinaryOp::And => a & b,
        BinaryOp::Or => a | b,
        BinaryOp::Xor => a ^ b,
        BinaryOp::Add => a.wrapping_add(b) & m,
        BinaryOp::Sub => a.wrapping_sub(b) & m,
        BinaryOp::Shl => {
            if b >= width as u64 {
                0
            } else {
                (a << b) & m
            }
        }
        BinaryOp::Shr => {
            if b >= width as u64 {
                0
            } else {
                a >> b
            }
        }
        BinaryOp::Eq => (a == b) as u64,
        BinaryOp::Ne => (a != b) as u64,
        BinaryOp::Lt => (a < b) as u64,
        BinaryOp::Le => (a <= b) as u64,
        BinaryOp::Gt => (a > b) as u64,
        BinaryOp::Ge => (a >= b) as u64,
        BinaryOp::LogAnd => (a != 0 && b != 0) as u64,
        BinaryOp::LogOr => (a != 0 || b != 0) as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetVar {
    pub name: String,
    pub width: u32,
}

/// Flattened single-clock transition system.
#[derive(Debug, Clone)]
pub struct NetModel {
    pub top: String,
    pub clock: Option<String>,
    /// Registers in hierarchical-name order; slot `i` is `state[i]`.
    pub state: Vec<NetVar>,
    /// Primary inputs (clock excluded) in name order; slot `state.len() + i`.
    pub inputs: Vec<NetVar>,
    /// Aligned with `state`.
    pub next_state: Vec<NetExpr>,
    /// Reset values, aligned with `state`.
    pub init: Vec<u64>,
    /// Every hierarchical net (registers, inputs and combinational nets).
    pub signals: BTreeMap<String, NetExpr>,
    /// Keyed by statement id (`S<n>`).
    pub statement_guards: BTreeMap<String, NetExpr>,
}

impl NetModel {
    pub fn num_slots(&self) -> usize {
        self.state.len() + self.inputs.len()
    }

    pub fn state_bits(&self) -> u32 {
        self.state.iter().map(|v| v.width).sum()
    }

    pub fn input_bits(&self) -> u32 {
        self.inputs.iter().map(|v| v.width).sum()
    }

    pub fn signal(&self, path: &str) -> Option<&NetExpr> {
        self.signals.get(path)
    }

    pub fn next_state_of(&self, name: &str) -> Option<&NetExpr> {
        let i = self.state.iter().position(|v| v.name == name)?;
        Some(&self.next_state[i])
    }

    pub fn init_of(&self, name: &str) -> Option<u64> {
        let i = self.state.iter().position(|v| v.name == name)?;
        Some(self.init[i])
    }

    /// Next state from a full slot vector (state then inputs).
    pub fn step(&self, slots: &[u64]) -> Vec<u64> {
        self.next_state.iter().map(|e| e.eval(slots)).collect()
    }

    /// All input valuations in lexicographic order (inputs by name, values ascending).
    pub fn input_valuations(&self) -> InputValuations {
        InputValuations {
            widths: self.inputs.iter().map(|v| v.width).collect(),
            next: Some(vec![0; self.inputs.len()]),
        }
    }
}

pub struct InputValuations {
    widths: Vec<u32>,
    next: Option<Vec<u64>>,
}

impl Iterator for InputValuations {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if succ[i] < mask(self.widths[i]) {
                succ[i] += 1;
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(cur)
    }
}

#[derive(Debug, Clone)]
enum Instr {
    Const(u64),
    Slot(usize),
    Unary(UnaryOp, usize, u32),
    Binary(BinaryOp, usize, usize, u32),
    Mux(usize, usize, usize),
    Concat(Vec<(usize, u32)>),
    Slice(usize, u32),
    Copy(usize),
}

/// A set of expression roots lowered to straight-line code with shared
/// subexpressions evaluated once.
#[derive(Debug, Clone)]
pub struct Program {
    instrs: Vec<(Instr, u64)>,
    roots: Vec<usize>,
}

impl Program {
    pub fn compile(roots: &[NetExpr]) -> Program {
        let mut index: HashMap<*const NetNode, usize> = HashMap::new();
        let mut instrs = Vec::new();
        let mut out_roots = Vec::with_capacity(roots.len());
        for r in roots {
            out_roots.push(Self::lower(r, &mut index, &mut instrs));
        }
        Program {
            instrs,
            roots: out_roots,
        }
    }

    fn lower(e: &NetExpr, index: &mut HashMap<*const NetNode, usize>, instrs: &mut Vec<(Instr, u64)>) -> usize {
        let key = Arc::as_ptr(&e.0);
        if let Some(i) = index.get(&key) {
            return *i;
        }
        // iterative post-order to avoid deep recursion on long mux chains
        let mut stack: Vec<(NetExpr, bool)> = vec![(e.clone(), false)];
        while let Some((n, expanded)) = stack.pop() {
            let k = Arc::as_ptr(&n.0);
            if index.contains_key(&k) {
                continue;
            }
            let children: Vec<NetExpr> = match n.op() {
                NetOp::Const(_) | NetOp::Slot(_) => vec![],
                NetOp::Unary(_, a) | NetOp::Slice(a, _) | NetOp::Zext(a) => vec![a.clone()],
                NetOp::Binary(_, a, b) => vec![a.clone(), b.clone()],
                NetOp::Mux(c, t, f) => vec![c.clone(), t.clone(), f.clone()],
                NetOp::Concat(ps) => ps.clone(),
            };
            if !expanded {
                stack.push((n.clone(), true));
                for c in children.iter().rev() {
                    if !index.contains_key(&Arc::as_ptr(&c.0)) {
                        stack.push((c.clone(), false));
                    }
                }
                continue;
            }
            let at = |c: &NetExpr| index[&Arc::as_ptr(&c.0)];
            let instr = match n.op() {
                NetOp::Const(v) => Instr::Const(*v),
                NetOp::Slot(i) => Instr::Slot(*i),
                NetOp::Unary(op, a) => Instr::Unary(*op, at(a), a.width()),
                NetOp::Binary(op, a, b) => Instr::Binary(*op, at(a), at(b), a.width()),
                NetOp::Mux(c, t, f) => Instr::Mux(at(c), at(t), at(f)),
                NetOp::Concat(ps) => Instr::Concat(ps.iter().map(|p| (at(p), p.width())).collect()),
                NetOp::Slice(a, lo) => Instr::Slice(at(a), *lo),
                NetOp::Zext(a) => Instr::Copy(at(a)),
            };
            instrs.push((instr, mask(n.width())));
            index.insert(k, instrs.len() - 1);
        }
        index[&key]
    }

    pub fn num_roots(&self) -> usize {
        self.roots.len()
    }

    /// Evaluate into `scratch`; read results with [`Program::root`].
    pub fn run(&self, slots: &[u64], scratch: &mut Vec<u64>) {
        scratch.clear();
        scratch.reserve(self.instrs.len());
        for (instr, m) in &self.instrs {
            let v = match instr {
                Instr::Const(v) => *v,
                Instr::Slot(i) => slots[*i],
                Instr::Unary(op, a, w) => eval_unary(*op, scratch[*a], *w),
                Instr::Binary(op, a, b, w) => eval_binary(*op, scratch[*a], scratch[*b], *w),
                Instr::Mux(c, t, f) => {
                    if scratch[*c] != 0 {
                        scratch[*t]
                    } else {
                        scratch[*f]
                    }
                }
                Instr::Concat(ps) => ps
                    .iter()
                    .fold(0u64, |acc, (p, w)| acc.checked_shl(*w).unwrap_or(0) | scratch[*p]),
                Instr::Slice(a, lo) => scratch[*a] >> lo,
                Instr::Copy(a) => scratch[*a],
            };
            scratch.push(v & m);
        }
    }

    pub fn root(&self, scratch: &[u64], i: usize) -> u64 {
        scratch[self.roots[i]]
    }
}
