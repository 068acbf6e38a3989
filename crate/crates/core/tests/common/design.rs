// SPDX-License-Identifier: Apache-2.0

//! Random clocked designs and properties with a reference interpreter and
//! a property oracle that works on explicit trace windows rather than
//! automata.
//!
//! Value semantics follow the subset's rules: operands of a binary operator
//! are zero-extended to the wider of the two and arithmetic results keep
//! that width; comparisons and logical operators give one bit.

use std::collections::{BTreeSet, HashSet};

use rand::rngs::StdRng;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigKind {
    Input,
    Reg,
    Wire,
}

#[derive(Debug, Clone)]
pub struct Sig {
    pub name: String,
    pub width: u32,
    pub kind: SigKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    And,
    Or,
    Xor,
    Add,
    Sub,
    Eq,
    Ne,
    Lt,
    Ge,
    LAnd,
    LOr,
}

impl Op {
    fn sym(self) -> &'static str {
        match self {
            Op::And => "&",
            Op::Or => "|",
            Op::Xor => "^",
            Op::Add => "+",
            Op::Sub => "-",
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Ge => ">=",
            Op::LAnd => "&&",
            Op::LOr => "||",
        }
    }

    fn one_bit(self) -> bool {
        matches!(self, Op::Eq | Op::Ne | Op::Lt | Op::Ge | Op::LAnd | Op::LOr)
    }
}

#[derive(Debug, Clone)]
pub enum E {
    Sig(usize),
    K(u64, u32),
    Not(Box<E>),
    LNot(Box<E>),
    Bin(Op, Box<E>, Box<E>),
    Bit(usize, u32),
    Past(usize, u32),
    Rose(usize),
    Fell(usize),
    Stable(usize),
}

pub fn mask(w: u32) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

fn bin(op: Op, a: E, b: E) -> E {
    E::Bin(op, Box::new(a), Box::new(b))
}

impl E {
    pub fn width(&self, sigs: &[Sig]) -> u32 {
        match self {
            E::Sig(i) | E::Past(i, _) => sigs[*i].width,
            E::K(_, w) => *w,
            E::Not(a) => a.width(sigs),
            E::Bin(op, a, b) if !op.one_bit() => a.width(sigs).max(b.width(sigs)),
            _ => 1,
        }
    }

    pub fn render(&self, sigs: &[Sig]) -> String {
        let n = |i: &usize| sigs[*i].name.as_str();
        match self {
            E::Sig(i) => n(i).to_string(),
            E::K(v, w) => format!("{w}'d{v}"),
            E::Not(a) => format!("~({})", a.render(sigs)),
            E::LNot(a) => format!("!({})", a.render(sigs)),
            E::Bin(op, a, b) => format!("({} {} {})", a.render(sigs), op.sym(), b.render(sigs)),
            E::Bit(i, k) => format!("{}[{k}]", n(i)),
            E::Past(i, 1) => format!("$past({})", n(i)),
            E::Past(i, d) => format!("$past({}, {d})", n(i)),
            E::Rose(i) => format!("$rose({})", n(i)),
            E::Fell(i) => format!("$fell({})", n(i)),
            E::Stable(i) => format!("$stable({})", n(i)),
        }
    }

    /// `at(sig, back)` is the value of `sig` `back` cycles ago, 0 before
    /// the first cycle.
    pub fn eval(&self, sigs: &[Sig], at: &dyn Fn(usize, u32) -> u64) -> u64 {
        match self {
            E::Sig(i) => at(*i, 0),
            E::K(v, _) => *v,
            E::Not(a) => !a.eval(sigs, at) & mask(a.width(sigs)),
            E::LNot(a) => (a.eval(sigs, at) == 0) as u64,
            E::Bin(op, a, b) => {
                let (x, y) = (a.eval(sigs, at), b.eval(sigs, at));
                let w = a.width(sigs).max(b.width(sigs));
                match op {
                    Op::And => x & y,
                    Op::Or => x | y,
                    Op::Xor => x ^ y,
                    Op::Add => x.wrapping_add(y) & mask(w),
                    Op::Sub => x.wrapping_sub(y) & mask(w),
                    Op::Eq => (x == y) as u64,
                    Op::Ne => (x != y) as u64,
                    Op::Lt => (x < y) as u64,
                    Op::Ge => (x >= y) as u64,
                    Op::LAnd => (x != 0 && y != 0) as u64,
                    Op::LOr => (x != 0 || y != 0) as u64,
                }
            }
            E::Bit(i, k) => (at(*i, 0) >> k) & 1,
            E::Past(i, d) => at(*i, *d),
            E::Rose(i) => (at(*i, 0) & 1 == 1 && at(*i, 1) & 1 == 0) as u64,
            E::Fell(i) => (at(*i, 0) & 1 == 0 && at(*i, 1) & 1 == 1) as u64,
            E::Stable(i) => (at(*i, 0) == at(*i, 1)) as u64,
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&E)) {
        f(self);
        match self {
            E::Not(a) | E::LNot(a) => a.visit(f),
            E::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    fn signals(&self, out: &mut BTreeSet<usize>) {
        self.visit(&mut |e| match e {
            E::Sig(i) | E::Bit(i, _) | E::Past(i, _) | E::Rose(i) | E::Fell(i) | E::Stable(i) => {
                out.insert(*i);
            }
            _ => {}
        });
    }

    fn history(&self) -> u32 {
        let mut h = 0;
        self.visit(&mut |e| match e {
            E::Past(_, d) => h = h.max(*d),
            E::Rose(_) | E::Fell(_) | E::Stable(_) => h = h.max(1),
            _ => {}
        });
        h
    }
}

#[derive(Debug, Clone)]
pub enum St {
    Assign(usize, E),
    If(E, Vec<St>, Vec<St>),
}

#[derive(Debug, Clone)]
pub struct Design {
    pub sigs: Vec<Sig>,
    pub wires: Vec<(usize, E)>,
    /// Leading `if (rst)` branch: the reset input and the constants it loads.
    pub reset: Option<(usize, Vec<(usize, u64)>)>,
    pub body: Vec<St>,
}

impl Design {
    pub fn of_kind(&self, k: SigKind) -> Vec<usize> {
        (0..self.sigs.len()).filter(|&i| self.sigs[i].kind == k).collect()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.sigs.iter().position(|s| s.name == name)
    }

    pub fn state_bits(&self) -> u32 {
        self.of_kind(SigKind::Reg).iter().map(|&r| self.sigs[r].width).sum()
    }

    /// Register values in [`SigKind::Reg`] order after power-up.
    pub fn init(&self) -> Vec<u64> {
        let regs = self.of_kind(SigKind::Reg);
        let mut v = vec![0; regs.len()];
        if let Some((_, loads)) = &self.reset {
            for (r, k) in loads {
                v[regs.iter().position(|x| x == r).unwrap()] = *k;
            }
        }
        v
    }

    /// Every input valuation, inputs in declaration order.
    pub fn input_space(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new()];
        for i in self.of_kind(SigKind::Input) {
            let w = self.sigs[i].width;
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..=mask(w)).map(move |v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// All signal values in one cycle.
    pub fn valuation(&self, regs: &[u64], inputs: &[u64]) -> Vec<u64> {
        let mut v = vec![0; self.sigs.len()];
        for (k, i) in self.of_kind(SigKind::Input).into_iter().enumerate() {
            v[i] = inputs[k];
        }
        for (k, r) in self.of_kind(SigKind::Reg).into_iter().enumerate() {
            v[r] = regs[k];
        }
        for (w, e) in &self.wires {
            let x = e.eval(&self.sigs, &|i, _| v[i]);
            v[*w] = x & mask(self.sigs[*w].width);
        }
        v
    }

    /// Register values at the next clock edge.
    pub fn next(&self, vals: &[u64]) -> Vec<u64> {
        let mut nv = vals.to_vec();
        let cur = |i: usize, _| vals[i];
        fn exec(d: &Design, body: &[St], nv: &mut Vec<u64>, cur: &dyn Fn(usize, u32) -> u64) {
            for s in body {
                match s {
                    St::Assign(r, e) => nv[*r] = e.eval(&d.sigs, cur) & mask(d.sigs[*r].width),
                    St::If(c, t, f) => {
                        if c.eval(&d.sigs, cur) != 0 {
                            exec(d, t, nv, cur)
                        } else {
                            exec(d, f, nv, cur)
                        }
                    }
                }
            }
        }
        match &self.reset {
            Some((rst, loads)) if vals[*rst] != 0 => {
                for (r, k) in loads {
                    nv[*r] = *k;
                }
            }
            _ => exec(self, &self.body, &mut nv, &cur),
        }
        self.of_kind(SigKind::Reg).into_iter().map(|r| nv[r]).collect()
    }

    pub fn verilog(&self) -> String {
        let decl = |s: &Sig| {
            if s.width == 1 {
                s.name.clone()
            } else {
                format!("[{}:0] {}", s.width - 1, s.name)
            }
        };
        let ports: Vec<String> = std::iter::once("input clk".to_string())
            .chain(self.of_kind(SigKind::Input).iter().map(|&i| format!("input {}", decl(&self.sigs[i]))))
            .collect();
        let mut out = format!("module dut({});\n", ports.join(", "));
        for r in self.of_kind(SigKind::Reg) {
            out.push_str(&format!("  reg {};\n", decl(&self.sigs[r])));
        }
        for (w, e) in &self.wires {
            out.push_str(&format!("  wire {};\n  assign {} = {};\n", decl(&self.sigs[*w]), self.sigs[*w].name, e.render(&self.sigs)));
        }
        out.push_str("  always @(posedge clk) begin\n");
        match &self.reset {
            Some((rst, loads)) => {
                out.push_str(&format!("    if ({}) begin\n", self.sigs[*rst].name));
                for (r, k) in loads {
                    out.push_str(&format!("      {} <= {}'d{k};\n", self.sigs[*r].name, self.sigs[*r].width));
                }
                out.push_str("    end else begin\n");
                self.render_body(&self.body, 3, &mut out);
                out.push_str("    end\n");
            }
            None => self.render_body(&self.body, 2, &mut out),
        }
        out.push_str("  end\nendmodule\n");
        out
    }

    fn render_body(&self, body: &[St], depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        for s in body {
            match s {
                St::Assign(r, e) => out.push_str(&format!("{pad}{} <= {};\n", self.sigs[*r].name, e.render(&self.sigs))),
                St::If(c, t, f) => {
                    out.push_str(&format!("{pad}if ({}) begin\n", c.render(&self.sigs)));
                    self.render_body(t, depth + 1, out);
                    if f.is_empty() {
                        out.push_str(&format!("{pad}end\n"));
                    } else {
                        out.push_str(&format!("{pad}end else begin\n"));
                        self.render_body(f, depth + 1, out);
                        out.push_str(&format!("{pad}end\n"));
                    }
                }
            }
        }
    }
}

fn pick<T: Copy>(rng: &mut StdRng, v: &[T]) -> T {
    v[rng.gen_range(0..v.len())]
}

/// A boolean-valued expression over `pool`.
pub fn gen_cond(rng: &mut StdRng, sigs: &[Sig], pool: &[usize], depth: u32) -> E {
    let x = pick(rng, pool);
    let w = sigs[x].width;
    match rng.gen_range(0..if depth > 0 { 7 } else { 5 }) {
        0 => E::Bin(
            pick(rng, &[Op::Eq, Op::Ne, Op::Lt, Op::Ge]),
            Box::new(E::Sig(x)),
            Box::new(E::K(rng.gen_range(0..=mask(w)), w)),
        ),
        1 => E::Bit(x, rng.gen_range(0..w)),
        2 => {
            let same: Vec<usize> = pool.iter().copied().filter(|&i| sigs[i].width == w).collect();
            let y = pick(rng, &same);
            bin(pick(rng, &[Op::Eq, Op::Ne, Op::Lt]), E::Sig(x), E::Sig(y))
        }
        3 => bin(Op::Ne, E::Sig(x), E::K(0, w)),
        4 => E::LNot(Box::new(E::Bit(x, 0))),
        5 => E::LNot(Box::new(gen_cond(rng, sigs, pool, depth - 1))),
        _ => bin(
            pick(rng, &[Op::LAnd, Op::LOr]),
            gen_cond(rng, sigs, pool, depth - 1),
            gen_cond(rng, sigs, pool, depth - 1),
        ),
    }
}

fn gen_rhs(rng: &mut StdRng, sigs: &[Sig], pool: &[usize], r: usize) -> E {
    let w = sigs[r].width;
    let narrow: Vec<usize> = pool.iter().copied().filter(|&i| sigs[i].width <= w).collect();
    match rng.gen_range(0..8) {
        0 => E::K(rng.gen_range(0..=mask(w)), w),
        1 if !narrow.is_empty() => E::Sig(pick(rng, &narrow)),
        2 => bin(Op::Add, E::Sig(r), E::K(rng.gen_range(1..=mask(w).max(1)), w)),
        3 => bin(Op::Sub, E::Sig(r), E::K(1, w)),
        4 if !narrow.is_empty() => bin(pick(rng, &[Op::Xor, Op::And, Op::Or]), E::Sig(r), E::Sig(pick(rng, &narrow))),
        5 => E::Not(Box::new(E::Sig(r))),
        6 => gen_cond(rng, sigs, pool, 1),
        _ => bin(Op::Add, E::Sig(r), E::K(1, w)),
    }
}

fn gen_stmt(rng: &mut StdRng, sigs: &[Sig], pool: &[usize], r: usize, depth: u32) -> St {
    match rng.gen_range(0..if depth > 0 { 4 } else { 3 }) {
        0 => St::Assign(r, gen_rhs(rng, sigs, pool, r)),
        1 => St::If(gen_cond(rng, sigs, pool, 1), vec![St::Assign(r, gen_rhs(rng, sigs, pool, r))], vec![]),
        2 => St::If(
            gen_cond(rng, sigs, pool, 1),
            vec![St::Assign(r, gen_rhs(rng, sigs, pool, r))],
            vec![St::Assign(r, gen_rhs(rng, sigs, pool, r))],
        ),
        _ => St::If(
            gen_cond(rng, sigs, pool, 0),
            vec![gen_stmt(rng, sigs, pool, r, depth - 1)],
            vec![St::Assign(r, gen_rhs(rng, sigs, pool, r))],
        ),
    }
}

/// A design with at most three input bits and at most `max_state_bits`
/// register bits.
pub fn gen_design(rng: &mut StdRng, max_state_bits: u32) -> Design {
    let mut sigs = Vec::new();
    let reset = rng.gen_bool(0.3);
    if reset {
        sigs.push(Sig { name: "rst".into(), width: 1, kind: SigKind::Input });
    }
    let first = if reset { 1 } else { rng.gen_range(1..=2) };
    sigs.push(Sig { name: "a".into(), width: first, kind: SigKind::Input });
    if rng.gen_bool(0.5) {
        sigs.push(Sig { name: "b".into(), width: 1, kind: SigKind::Input });
    }
    let mut bits = 0;
    for k in 0..rng.gen_range(1..=4) {
        let w = rng.gen_range(1..=4).min(max_state_bits - bits);
        if w == 0 {
            break;
        }
        bits += w;
        sigs.push(Sig { name: format!("r{k}"), width: w, kind: SigKind::Reg });
    }
    let pool: Vec<usize> = (0..sigs.len()).filter(|&i| sigs[i].name != "rst").collect();
    let mut wires = Vec::new();
    if rng.gen_bool(0.4) {
        let e = gen_cond(rng, &sigs, &pool, 1);
        sigs.push(Sig { name: "w0".into(), width: 1, kind: SigKind::Wire });
        wires.push((sigs.len() - 1, e));
    }
    let pool: Vec<usize> = (0..sigs.len()).filter(|&i| sigs[i].name != "rst").collect();
    let regs: Vec<usize> = (0..sigs.len()).filter(|&i| sigs[i].kind == SigKind::Reg).collect();
    let body = regs.iter().map(|&r| gen_stmt(rng, &sigs, &pool, r, 1)).collect();
    let reset = reset.then(|| {
        let mut loads = Vec::new();
        for &r in &regs {
            if rng.gen_bool(0.7) {
                loads.push((r, rng.gen_range(0..=mask(sigs[r].width))));
            }
        }
        (0, loads)
    });
    Design { sigs, wires, reset, body }
}

#[derive(Debug, Clone)]
pub struct Seq(pub Vec<(u32, u32, E)>);

impl Seq {
    fn span(&self) -> u32 {
        self.0.iter().map(|e| e.1).sum()
    }

    fn render(&self, sigs: &[Sig]) -> String {
        let mut parts = Vec::new();
        for (k, (mn, mx, e)) in self.0.iter().enumerate() {
            let delay = match (k, mn, mx) {
                (0, 0, 0) => String::new(),
                (_, a, b) if a == b => format!("##{a} "),
                (_, a, b) => format!("##[{a}:{b}] "),
            };
            parts.push(format!("{delay}({})", e.render(sigs)));
        }
        parts.join(" ")
    }

    fn exprs(&self) -> impl Iterator<Item = &E> {
        self.0.iter().map(|e| &e.2)
    }
}

#[derive(Debug, Clone)]
pub struct Prop {
    pub cover: bool,
    pub disable: Option<E>,
    /// Antecedent and whether the implication is overlapped.
    pub ante: Option<(Seq, bool)>,
    pub cons: Seq,
}

impl Prop {
    pub fn render(&self, label: &str, sigs: &[Sig]) -> String {
        let mut body = String::from("@(posedge clk) ");
        if let Some(d) = &self.disable {
            body.push_str(&format!("disable iff ({}) ", d.render(sigs)));
        }
        if let Some((a, ov)) = &self.ante {
            body.push_str(&format!("{} {} ", a.render(sigs), if *ov { "|->" } else { "|=>" }));
        }
        body.push_str(&self.cons.render(sigs));
        let kw = if self.cover { "cover" } else { "assert" };
        format!("{label}: {kw} property ({body});")
    }

    fn exprs(&self) -> Vec<&E> {
        let mut v: Vec<&E> = self.disable.iter().collect();
        if let Some((a, _)) = &self.ante {
            v.extend(a.exprs());
        }
        v.extend(self.cons.exprs());
        v
    }
}

fn gen_prop_expr(rng: &mut StdRng, d: &Design, pool: &[usize]) -> E {
    let x = pick(rng, pool);
    match rng.gen_range(0..10) {
        0 => E::Rose(x),
        1 => E::Fell(x),
        2 => E::Stable(x),
        3 => {
            let w = d.sigs[x].width;
            bin(Op::Eq, E::Past(x, rng.gen_range(1..=2)), E::K(rng.gen_range(0..=mask(w)), w))
        }
        4 => {
            let y = pick(rng, pool);
            let w = d.sigs[x].width.max(d.sigs[y].width);
            bin(pick(rng, &[Op::Eq, Op::Ne]), bin(Op::Add, E::Sig(x), E::Sig(y)), E::K(rng.gen_range(0..=mask(w)), w))
        }
        _ => gen_cond(rng, &d.sigs, pool, 1),
    }
}

fn gen_seq(rng: &mut StdRng, d: &Design, pool: &[usize], first_delay: bool) -> Seq {
    let n = if rng.gen_bool(0.6) { 1 } else { 2 };
    let mut v = Vec::new();
    for k in 0..n {
        let (mn, mx) = if k == 0 && !first_delay {
            (0, 0)
        } else if rng.gen_bool(0.7) {
            let x = rng.gen_range(if k == 0 { 1 } else { 0 }..=2);
            (x, x)
        } else {
            let a = rng.gen_range(0..=1);
            (a, a + rng.gen_range(1..=2))
        };
        v.push((mn, mx, gen_prop_expr(rng, d, pool)));
    }
    Seq(v)
}

/// A property whose oracle window spans at most `MAX_WINDOW` cycles.
pub fn gen_prop(rng: &mut StdRng, d: &Design) -> Prop {
    loop {
        let p = gen_prop_any(rng, d);
        if Projection::new(d, &p).capacity <= MAX_WINDOW {
            return p;
        }
    }
}

pub const MAX_WINDOW: usize = 6;

fn gen_prop_any(rng: &mut StdRng, d: &Design) -> Prop {
    let pool: Vec<usize> = (0..d.sigs.len()).collect();
    let cover = rng.gen_bool(0.25);
    let disable = rng.gen_bool(0.3).then(|| {
        let inputs = d.of_kind(SigKind::Input);
        gen_cond(rng, &d.sigs, &inputs, 0)
    });
    let ante = (!cover && rng.gen_bool(0.7)).then(|| (gen_seq(rng, d, &pool, false), rng.gen_bool(0.5)));
    let delayed = !cover && rng.gen_bool(0.2);
    let cons = gen_seq(rng, d, &pool, delayed);
    Prop { cover, disable, ante, cons }
}

/// An input constraint, evaluated on the current cycle only.
pub fn gen_assumption(rng: &mut StdRng, d: &Design, with_regs: bool) -> E {
    let pool = if with_regs {
        (0..d.sigs.len()).filter(|&i| d.sigs[i].kind != SigKind::Wire).collect()
    } else {
        d.of_kind(SigKind::Input)
    };
    gen_cond(rng, &d.sigs, &pool, 1)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Oracle {
    /// Earliest cycle at which an assertion attempt is known to fail.
    pub first_fail: Option<u32>,
    /// Earliest cycle at which a cover sequence completes.
    pub first_hit: Option<u32>,
    /// Some antecedent match exists on a reachable, admissible path.
    pub ante_ever: bool,
    pub states: usize,
}

/// Checks the property against one trace window. Index `len - 1` is the
/// current cycle; a window shorter than its capacity starts at cycle 0.
struct Window<'a> {
    d: &'a Design,
    p: &'a Prop,
    pos: &'a [Option<usize>],
    rows: &'a [Vec<u64>],
}

impl Window<'_> {
    fn holds(&self, e: &E, j: i64) -> bool {
        let at = |i: usize, back: u32| {
            let k = j - back as i64;
            if k < 0 {
                0
            } else {
                self.rows[k as usize][self.pos[i].expect("projected")]
            }
        };
        e.eval(&self.d.sigs, &at) != 0
    }

    fn disabled_between(&self, t: i64, f: i64) -> bool {
        match &self.p.disable {
            Some(d) => (t..=f).any(|j| self.holds(d, j)),
            None => false,
        }
    }

    fn ends(&self, s: &Seq, start: i64, upto: i64) -> BTreeSet<i64> {
        let mut out = BTreeSet::new();
        self.ends_from(s, 0, start, upto, &mut out);
        out
    }

    fn ends_from(&self, s: &Seq, k: usize, anchor: i64, upto: i64, out: &mut BTreeSet<i64>) {
        let (mn, mx, e) = &s.0[k];
        for p in anchor + *mn as i64..=(anchor + *mx as i64).min(upto) {
            if self.holds(e, p) {
                if k + 1 == s.0.len() {
                    out.insert(p);
                } else {
                    self.ends_from(s, k + 1, p, upto, out);
                }
            }
        }
    }

    /// Some partial match started at `s` can still complete after `f`.
    fn alive_after(&self, seq: &Seq, k: usize, anchor: i64, f: i64) -> bool {
        let (mn, mx, e) = &seq.0[k];
        if anchor + *mx as i64 > f {
            return true;
        }
        k + 1 < seq.0.len()
            && (anchor + *mn as i64..=(anchor + *mx as i64).min(f)).any(|p| self.holds(e, p) && self.alive_after(seq, k + 1, p, f))
    }

    fn fails_at(&self, s: i64, f: i64) -> bool {
        let c = &self.p.cons;
        self.ends(c, s, f).is_empty() && !self.alive_after(c, 0, s, f) && (f == s || self.alive_after(c, 0, s, f - 1))
    }

    fn now(&self) -> i64 {
        self.rows.len() as i64 - 1
    }

    fn ante_span(&self) -> i64 {
        self.p.ante.as_ref().map_or(0, |(a, _)| a.span() as i64 + 1)
    }

    fn fail_now(&self) -> bool {
        let f = self.now();
        let lookback = self.ante_span() + self.p.cons.span() as i64;
        for t in (f - lookback).max(0)..=f {
            if self.disabled_between(t, f) {
                continue;
            }
            let starts: Vec<i64> = match &self.p.ante {
                None => vec![t],
                Some((a, ov)) => self.ends(a, t, f).into_iter().map(|e| if *ov { e } else { e + 1 }).filter(|&s| s <= f).collect(),
            };
            if starts.into_iter().any(|s| self.fails_at(s, f)) {
                return true;
            }
        }
        false
    }

    fn ante_now(&self) -> bool {
        let f = self.now();
        let Some((a, _)) = &self.p.ante else { return false };
        ((f - a.span() as i64).max(0)..=f).any(|t| !self.disabled_between(t, f) && self.ends(a, t, f).contains(&f))
    }

    fn hit_now(&self) -> bool {
        let f = self.now();
        let c = &self.p.cons;
        ((f - c.span() as i64).max(0)..=f).any(|t| !self.disabled_between(t, f) && self.ends(c, t, f).contains(&f))
    }
}

/// Projection of a property onto the signals it reads.
pub struct Projection {
    refs: Vec<usize>,
    pos: Vec<Option<usize>>,
    capacity: usize,
}

impl Projection {
    pub fn new(d: &Design, p: &Prop) -> Projection {
        let mut set = BTreeSet::new();
        let mut hist = 0;
        for e in p.exprs() {
            e.signals(&mut set);
            hist = hist.max(e.history());
        }
        let refs: Vec<usize> = set.into_iter().collect();
        let mut pos = vec![None; d.sigs.len()];
        for (k, &i) in refs.iter().enumerate() {
            pos[i] = Some(k);
        }
        let ante = p.ante.as_ref().map_or(0, |(a, _)| a.span() + 1);
        let capacity = (ante + p.cons.span() + hist + 1) as usize;
        Projection { refs, pos, capacity }
    }

    fn push(&self, rows: &[Vec<u64>], vals: &[u64]) -> Vec<Vec<u64>> {
        let mut out: Vec<Vec<u64>> = rows.to_vec();
        out.push(self.refs.iter().map(|&i| vals[i]).collect());
        if out.len() > self.capacity {
            out.remove(0);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Flags {
    pub fail: bool,
    pub hit: bool,
    pub ante: bool,
}

fn flags(d: &Design, p: &Prop, pr: &Projection, rows: &[Vec<u64>]) -> Flags {
    let w = Window { d, p, pos: &pr.pos, rows };
    if p.cover {
        Flags { hit: w.hit_now(), ..Flags::default() }
    } else {
        Flags {
            fail: w.fail_now(),
            ante: w.ante_now(),
            hit: false,
        }
    }
}

fn admissible(d: &Design, assumes: &[E], vals: &[u64]) -> bool {
    assumes.iter().all(|a| a.eval(&d.sigs, &|i, _| vals[i]) != 0)
}

/// Breadth-first exploration of (registers, recent trace window) until
/// closure or until the verdict-deciding event is found. Returns `None`
/// when more than `max_states` states would be needed.
pub fn oracle(d: &Design, p: &Prop, assumes: &[E], max_states: usize) -> Option<Oracle> {
    let pr = Projection::new(d, p);
    let inputs = d.input_space();
    let mut out = Oracle::default();
    let mut seen: HashSet<(Vec<u64>, Vec<Vec<u64>>)> = HashSet::new();
    let start = (d.init(), Vec::new());
    seen.insert(start.clone());
    let mut frontier = vec![start];
    let mut cycle = 0u32;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (regs, rows) in &frontier {
            for inp in &inputs {
                let vals = d.valuation(regs, inp);
                if !admissible(d, assumes, &vals) {
                    continue;
                }
                let rows = pr.push(rows, &vals);
                let f = flags(d, p, &pr, &rows);
                out.ante_ever |= f.ante;
                if f.fail && out.first_fail.is_none() {
                    out.first_fail = Some(cycle);
                }
                if f.hit && out.first_hit.is_none() {
                    out.first_hit = Some(cycle);
                }
                let key = (d.next(&vals), rows);
                if !seen.contains(&key) {
                    if seen.len() >= max_states {
                        return None;
                    }
                    seen.insert(key.clone());
                    next.push(key);
                }
            }
        }
        if out.first_fail.is_some() || out.first_hit.is_some() {
            break;
        }
        frontier = next;
        cycle += 1;
    }
    out.states = seen.len();
    Some(out)
}

/// Replays one input sequence. Returns the flags of the last cycle, or a
/// description of the first divergence from the recorded register values
/// or the assumptions.
pub fn replay(d: &Design, p: &Prop, assumes: &[E], inputs: &[Vec<u64>], states: &[Vec<u64>]) -> Result<Flags, String> {
    let pr = Projection::new(d, p);
    let mut regs = d.init();
    let mut rows = Vec::new();
    let mut last = Flags::default();
    for (c, inp) in inputs.iter().enumerate() {
        if states[c] != regs {
            return Err(format!("cycle {c}: recorded state {:?}, interpreter {:?}", states[c], regs));
        }
        let vals = d.valuation(&regs, inp);
        if !admissible(d, assumes, &vals) {
            return Err(format!("cycle {c}: inputs violate an assumption"));
        }
        rows = pr.push(&rows, &vals);
        last = flags(d, p, &pr, &rows);
        if c + 1 < inputs.len() && (last.fail || last.hit) {
            return Err(format!("cycle {c}: event before the end of the trace"));
        }
        regs = d.next(&vals);
    }
    Ok(last)
}
