// SPDX-License-Identifier: Apache-2.0

//! Flattening of a parsed design into a single-clock transition system.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::syntax::expr::min_width;
use crate::syntax::{DiagCode, Diagnostic, Diagnostics, Expr, Span};

use super::ast::{AlwaysBlock, AlwaysKind, Direction, Item, Module, Stmt, StmtId};
use super::model::{clocked_registers, Design, Scope};
use super::netlist::{NetExpr, NetModel, NetVar};

pub fn elaborate(design: &Design, top: &str, overrides: &BTreeMap<String, u64>) -> Result<NetModel, Diagnostics> {
    let Some(top_mod) = design.ast.module(top) else {
        return Err(Diagnostic::error(DiagCode::UnresolvedInstance, 1, 1, format!("top module '{top}' not found")).into());
    };
    for name in overrides.keys() {
        match top_mod.param(name) {
            Some(p) if !p.local => {}
            _ => {
                return Err(Diagnostic::error(
                    DiagCode::Undeclared,
                    top_mod.span.line,
                    top_mod.span.col,
                    format!("override names no parameter '{name}' of '{top}'"),
                )
                .into())
            }
        }
    }
    let mut e = Elab {
        design,
        insts: Vec::new(),
        memo: HashMap::new(),
        in_progress: Vec::new(),
        blocks_in_progress: BTreeSet::new(),
        blocks_done: BTreeSet::new(),
        guards: BTreeMap::new(),
        state_slots: BTreeMap::new(),
        input_slots: BTreeMap::new(),
        clock: None,
    };
    e.run(top_mod, overrides).map_err(Diagnostics::from)
}

#[derive(Debug, Clone)]
enum Driver {
    TopInput,
    Clock,
    Reg,
    Assign(usize),
    CombAlways(usize),
    ChildOut(usize, String),
    PortIn,
    Undriven,
}

struct Inst<'a> {
    path: String,
    module: &'a Module,
    scope: Scope,
    parent: Option<usize>,
    /// This instance's port connections, in the parent's scope.
    conns: BTreeMap<String, Option<Expr>>,
    drivers: BTreeMap<String, Driver>,
}

struct Elab<'a> {
    design: &'a Design,
    insts: Vec<Inst<'a>>,
    memo: HashMap<(usize, String), NetExpr>,
    in_progress: Vec<(usize, String)>,
    blocks_in_progress: BTreeSet<(usize, usize)>,
    blocks_done: BTreeSet<(usize, usize)>,
    guards: BTreeMap<StmtId, Vec<NetExpr>>,
    state_slots: BTreeMap<String, (usize, u32)>,
    input_slots: BTreeMap<String, (usize, u32)>,
    clock: Option<String>,
}

fn err(code: DiagCode, span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(code, span.line.max(1), span.col.max(1), msg)
}

/// Symbolic values inside one always block.
#[derive(Clone, Default)]
struct SymState {
    /// Blocking values visible to later reads; `None` is "not yet assigned"
    /// in a combinational block.
    vals: BTreeMap<String, Option<NetExpr>>,
    /// Scheduled non-blocking updates.
    nb: BTreeMap<String, NetExpr>,
}

impl<'a> Elab<'a> {
    fn run(&mut self, top: &'a Module, overrides: &BTreeMap<String, u64>) -> Result<NetModel, Diagnostic> {
        self.instantiate(top, top.name.clone(), None, BTreeMap::new(), overrides, &mut Vec::new())?;
        self.assign_drivers()?;
        self.resolve_clock()?;
        self.allocate_slots();

        // every net, which also surfaces combinational cycles
        let mut signals = BTreeMap::new();
        for i in 0..self.insts.len() {
            let names: Vec<String> = self.insts[i].drivers.keys().cloned().collect();
            for n in names {
                if matches!(self.insts[i].drivers[&n], Driver::Clock) {
                    continue;
                }
                let v = self.value(i, &n, Span::default())?;
                signals.insert(format!("{}.{n}", self.insts[i].path), v);
            }
        }

        let n_state = self.state_slots.len();
        let mut next_state: Vec<Option<NetExpr>> = vec![None; n_state];
        let mut init = vec![0u64; n_state];
        for i in 0..self.insts.len() {
            let module = self.insts[i].module;
            for item in &module.items {
                match item {
                    Item::Always(b) if matches!(b.kind, AlwaysKind::Clocked { .. }) => {
                        let (next, resets) = self.clocked_block(i, b)?;
                        for (name, v) in next {
                            let path = format!("{}.{name}", self.insts[i].path);
                            let slot = self.state_slots[&path].0;
                            next_state[slot] = Some(v);
                        }
                        for (name, v) in resets {
                            let path = format!("{}.{name}", self.insts[i].path);
                            init[self.state_slots[&path].0] = v;
                        }
                    }
                    Item::Assign(a) => {
                        self.guards.entry(a.id).or_default().push(NetExpr::konst(1, 1));
                    }
                    _ => {}
                }
            }
        }

        let mut state = vec![NetVar { name: String::new(), width: 0 }; n_state];
        for (name, (slot, width)) in &self.state_slots {
            state[*slot] = NetVar {
                name: name.clone(),
                width: *width,
            };
        }
        let mut inputs = vec![NetVar { name: String::new(), width: 0 }; self.input_slots.len()];
        for (name, (slot, width)) in &self.input_slots {
            inputs[slot - n_state] = NetVar {
                name: name.clone(),
                width: *width,
            };
        }
        let next_state = next_state
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or_else(|| NetExpr::slot(i, state[i].width)))
            .collect();

        let mut statement_guards = BTreeMap::new();
        for s in &self.design.model.statements {
            let id: u32 = s.id[1..].parse().unwrap_or(0);
            let g = self
                .guards
                .remove(&StmtId(id))
                .map(|gs| gs.into_iter().reduce(NetExpr::or).unwrap())
                .unwrap_or_else(|| NetExpr::konst(0, 1));
            statement_guards.insert(s.id.clone(), g);
        }

        Ok(NetModel {
            top: top.name.clone(),
            clock: self.clock.clone(),
            state,
            inputs,
            next_state,
            init,
            signals,
            statement_guards,
        })
    }

    fn instantiate(
        &mut self,
        module: &'a Module,
        path: String,
        parent: Option<usize>,
        conns: BTreeMap<String, Option<Expr>>,
        overrides: &BTreeMap<String, u64>,
        stack: &mut Vec<&'a str>,
    ) -> Result<usize, Diagnostic> {
        if stack.contains(&module.name.as_str()) {
            return Err(err(DiagCode::Cycle, module.span, format!("recursive instantiation of '{}'", module.name)));
        }
        stack.push(&module.name);
        let scope = Scope::build(module, overrides)?;
        let idx = self.insts.len();
        self.insts.push(Inst {
            path: path.clone(),
            module,
            scope,
            parent,
            conns,
            drivers: BTreeMap::new(),
        });
        for item in &module.items {
            if let Item::Instance(inst) = item {
                let child = self.design.ast.module(&inst.module).ok_or_else(|| {
                    err(
                        DiagCode::UnresolvedInstance,
                        inst.span,
                        format!("instance '{}' of unknown module '{}'", inst.name, inst.module),
                    )
                })?;
                let mut ov = BTreeMap::new();
                for (name, e) in &inst.params {
                    match child.param(name) {
                        Some(p) if !p.local => {}
                        _ => {
                            return Err(err(
                                DiagCode::Undeclared,
                                inst.span,
                                format!("module '{}' has no parameter '{name}'", child.name),
                            ))
                        }
                    }
                    ov.insert(name.clone(), self.insts[idx].scope.const_eval(e)?);
                }
                let mut cmap = BTreeMap::new();
                for (port, e) in &inst.conns {
                    if child.port(port).is_none() {
                        return Err(err(
                            DiagCode::Undeclared,
                            inst.span,
                            format!("module '{}' has no port '{port}'", child.name),
                        ));
                    }
                    if cmap.insert(port.clone(), e.clone()).is_some() {
                        return Err(err(DiagCode::Duplicate, inst.span, format!("port '{port}' connected twice")));
                    }
                }
                self.instantiate(child, format!("{path}.{}", inst.name), Some(idx), cmap, &ov, stack)?;
            }
        }
        stack.pop();
        Ok(idx)
    }

    fn child_index(&self, parent: usize, name: &str) -> usize {
        let path = format!("{}.{name}", self.insts[parent].path);
        self.insts.iter().position(|i| i.path == path).expect("instantiated")
    }

    fn assign_drivers(&mut self) -> Result<(), Diagnostic> {
        for i in 0..self.insts.len() {
            let m = self.insts[i].module;
            let is_top = self.insts[i].parent.is_none();
            let mut drivers: BTreeMap<String, Driver> = BTreeMap::new();
            for p in &m.ports {
                drivers.insert(
                    p.name.clone(),
                    match (p.dir, is_top) {
                        (Direction::Input, true) => Driver::TopInput,
                        (Direction::Input, false) => Driver::PortIn,
                        (Direction::Output, _) => Driver::Undriven,
                    },
                );
            }
            for n in &m.nets {
                drivers.entry(n.name.clone()).or_insert(Driver::Undriven);
            }
            let mut set = |name: &str, d: Driver, span: Span| -> Result<(), Diagnostic> {
                match drivers.get(name) {
                    None => Err(err(DiagCode::Undeclared, span, format!("'{name}' is not declared"))),
                    Some(Driver::Undriven) => {
                        drivers.insert(name.to_string(), d);
                        Ok(())
                    }
                    Some(Driver::TopInput | Driver::PortIn) => {
                        Err(err(DiagCode::MultipleDrivers, span, format!("input port '{name}' is driven inside the module")))
                    }
                    Some(_) => Err(err(DiagCode::MultipleDrivers, span, format!("'{name}' has more than one driver"))),
                }
            };
            for (bi, item) in m.items.iter().enumerate() {
                match item {
                    Item::Assign(a) => set(&a.lhs, Driver::Assign(bi), a.span)?,
                    Item::Always(b) => {
                        let d = match b.kind {
                            AlwaysKind::Clocked { .. } => Driver::Reg,
                            AlwaysKind::Comb => Driver::CombAlways(bi),
                        };
                        for name in b.body.assigned_names() {
                            set(&name, d.clone(), b.span)?;
                        }
                    }
                    Item::Instance(inst) => {
                        let child = self.child_index(i, &inst.name);
                        let cm = self.insts[child].module;
                        for (port, e) in &inst.conns {
                            let pd = cm.port(port).expect("checked");
                            if pd.dir != Direction::Output {
                                continue;
                            }
                            match e {
                                None => {}
                                Some(Expr::Ident { path, span }) if path.len() == 1 => {
                                    set(&path[0], Driver::ChildOut(child, port.clone()), *span)?
                                }
                                Some(other) => {
                                    return Err(err(
                                        DiagCode::Unsupported,
                                        other.span().unwrap_or(inst.span),
                                        format!("unsupported construct: output port '{port}' must connect to a plain net"),
                                    ))
                                }
                            }
                        }
                    }
                }
            }
            self.insts[i].drivers = drivers;
        }
        Ok(())
    }

    fn resolve_clock(&mut self) -> Result<(), Diagnostic> {
        let mut clock: Option<String> = None;
        for i in 0..self.insts.len() {
            for item in &self.insts[i].module.items {
                let Item::Always(b) = item else { continue };
                let AlwaysKind::Clocked { clock: local } = &b.kind else { continue };
                let mut chain = Vec::new();
                let top_name = self.trace_clock(i, local, b.span, &mut chain)?;
                for (ci, name) in chain {
                    self.insts[ci].drivers.insert(name, Driver::Clock);
                }
                match &clock {
                    None => clock = Some(top_name),
                    Some(c) if *c == top_name => {}
                    Some(c) => {
                        return Err(err(
                            DiagCode::Unsupported,
                            b.span,
                            format!("unsupported construct: second clock '{top_name}' (design is clocked by '{c}')"),
                        ))
                    }
                }
            }
        }
        self.clock = clock;
        Ok(())
    }

    fn trace_clock(
        &self,
        inst: usize,
        local: &str,
        span: Span,
        chain: &mut Vec<(usize, String)>,
    ) -> Result<String, Diagnostic> {
        chain.push((inst, local.to_string()));
        let m = self.insts[inst].module;
        match m.port(local) {
            Some(p) if p.dir == Direction::Input => {}
            _ => {
                return Err(err(
                    DiagCode::Clocking,
                    span,
                    format!("clock '{local}' must be an input port of '{}'", m.name),
                ))
            }
        }
        match self.insts[inst].parent {
            None => Ok(local.to_string()),
            Some(p) => match self.insts[inst].conns.get(local) {
                Some(Some(Expr::Ident { path, .. })) if path.len() == 1 => self.trace_clock(p, &path[0], span, chain),
                _ => Err(err(
                    DiagCode::Clocking,
                    span,
                    format!("clock port '{local}' of '{}' must connect to a clock net", self.insts[inst].path),
                )),
            },
        }
    }

    fn allocate_slots(&mut self) {
        let mut regs = Vec::new();
        for inst in &self.insts {
            for r in clocked_registers(inst.module) {
                regs.push((format!("{}.{r}", inst.path), inst.scope.widths[&r]));
            }
        }
        regs.sort();
        for (i, (name, w)) in regs.into_iter().enumerate() {
            self.state_slots.insert(name, (i, w));
        }
        let n_state = self.state_slots.len();
        let top = &self.insts[0];
        let mut ins: Vec<(String, u32)> = top
            .drivers
            .iter()
            .filter(|(_, d)| matches!(d, Driver::TopInput))
            .map(|(n, _)| (format!("{}.{n}", top.path), top.scope.widths[n]))
            .collect();
        ins.sort();
        for (i, (name, w)) in ins.into_iter().enumerate() {
            self.input_slots.insert(name, (n_state + i, w));
        }
    }

    fn value(&mut self, inst: usize, name: &str, span: Span) -> Result<NetExpr, Diagnostic> {
        let key = (inst, name.to_string());
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if let Some(pos) = self.in_progress.iter().position(|k| *k == key) {
            let cycle: Vec<String> = self.in_progress[pos..]
                .iter()
                .map(|(i, n)| format!("{}.{n}", self.insts[*i].path))
                .collect();
            return Err(err(
                DiagCode::Cycle,
                span,
                format!("combinational cycle: {} -> {}.{name}", cycle.join(" -> "), self.insts[inst].path),
            ));
        }
        let path = format!("{}.{name}", self.insts[inst].path);
        let Some(driver) = self.insts[inst].drivers.get(name).cloned() else {
            return Err(err(DiagCode::Undeclared, span, format!("'{name}' is not declared")));
        };
        let width = self.insts[inst].scope.widths[name];
        self.in_progress.push(key.clone());
        let v = match driver {
            Driver::TopInput => {
                let (slot, w) = self.input_slots[&path];
                Ok(NetExpr::slot(slot, w))
            }
            Driver::Reg => {
                let (slot, w) = self.state_slots[&path];
                Ok(NetExpr::slot(slot, w))
            }
            Driver::Clock => Err(err(
                DiagCode::Unsupported,
                span,
                format!("unsupported construct: clock '{name}' used as data"),
            )),
            Driver::Undriven => Ok(NetExpr::konst(0, width)),
            Driver::Assign(bi) => {
                let Item::Assign(a) = &self.insts[inst].module.items[bi] else { unreachable!() };
                let rhs = self.lower(inst, &a.rhs, None)?;
                fit(rhs, width, name, a.span)
            }
            Driver::CombAlways(bi) => {
                self.comb_block(inst, bi)?;
                // comb_block memoizes every output it assigns
                self.in_progress.pop();
                return Ok(self.memo[&key].clone());
            }
            Driver::ChildOut(child, port) => {
                let v = self.value(child, &port, span)?;
                if v.width() != width {
                    Err(err(
                        DiagCode::Width,
                        span,
                        format!("port '{port}' is {} bits but '{name}' is {width} bits", v.width()),
                    ))
                } else {
                    Ok(v)
                }
            }
            Driver::PortIn => {
                let parent = self.insts[inst].parent.expect("non-top");
                match self.insts[inst].conns.get(name).cloned().flatten() {
                    None => Ok(NetExpr::konst(0, width)),
                    Some(e) => {
                        let v = self.lower(parent, &e, None)?;
                        let literal = matches!(e, Expr::Number { .. });
                        if v.width() == width || (literal && v.width() < width) {
                            Ok(v.zext(width))
                        } else {
                            Err(err(
                                DiagCode::Width,
                                e.span().unwrap_or(span),
                                format!(
                                    "port '{name}' of '{}' expects {width} bits, connection has {} bits",
                                    self.insts[inst].path,
                                    v.width()
                                ),
                            ))
                        }
                    }
                }
            }
        };
        self.in_progress.pop();
        let v = v?;
        self.memo.insert(key, v.clone());
        Ok(v)
    }

    fn lower(&mut self, inst: usize, e: &Expr, env: Option<&SymState>) -> Result<NetExpr, Diagnostic> {
        Ok(match e {
            Expr::Number { value, width } => NetExpr::konst(*value, width.unwrap_or_else(|| min_width(*value))),
            Expr::Ident { path, span } => {
                let name = &path[0];
                if let Some(st) = env {
                    if let Some(v) = st.vals.get(name) {
                        return v.clone().ok_or_else(|| {
                            err(
                                DiagCode::Latch,
                                *span,
                                format!("'{name}' is read before it is assigned in a combinational block"),
                            )
                        });
                    }
                }
                let scope = &self.insts[inst].scope;
                if let Some(v) = scope.param_value(name) {
                    return Ok(NetExpr::konst(v, scope.param_width(name).unwrap()));
                }
                self.value(inst, name, *span)?
            }
            Expr::Unary { op, arg } => NetExpr::unary(*op, self.lower(inst, arg, env)?),
            Expr::Binary { op, lhs, rhs } => {
                let a = self.lower(inst, lhs, env)?;
                let b = self.lower(inst, rhs, env)?;
                NetExpr::binary(*op, a, b)
            }
            Expr::Ternary { cond, then, els } => {
                let c = self.lower(inst, cond, env)?;
                let t = self.lower(inst, then, env)?;
                let f = self.lower(inst, els, env)?;
                NetExpr::mux(c, t, f)
            }
            Expr::Concat(items) => {
                let mut parts = Vec::with_capacity(items.len());
                for i in items {
                    parts.push(self.lower(inst, i, env)?);
                }
                let w: u32 = parts.iter().map(NetExpr::width).sum();
                if w > 64 {
                    return Err(err(
                        DiagCode::Unsupported,
                        e.span().unwrap_or_default(),
                        "unsupported construct: concatenation wider than 64 bits",
                    ));
                }
                NetExpr::concat(parts)
            }
            Expr::Select { base, msb, lsb } => {
                let b = self.lower(inst, base, env)?;
                let scope = &self.insts[inst].scope;
                let hi = scope.const_eval(msb)?;
                let lo = match lsb {
                    Some(l) => scope.const_eval(l)?,
                    None => hi,
                };
                if lo > hi || hi >= b.width() as u64 {
                    return Err(err(
                        DiagCode::Width,
                        e.span().unwrap_or_default(),
                        format!("select [{hi}:{lo}] out of range for {}-bit value", b.width()),
                    ));
                }
                NetExpr::slice(b, lo as u32, (hi - lo + 1) as u32)
            }
            Expr::Macro { span, .. } | Expr::Call { span, .. } => {
                return Err(err(DiagCode::Unsupported, *span, format!("unsupported construct: '{e}' in RTL")))
            }
        })
    }

    fn comb_block(&mut self, inst: usize, bi: usize) -> Result<(), Diagnostic> {
        let key = (inst, bi);
        if self.blocks_done.contains(&key) {
            return Ok(());
        }
        let Item::Always(b) = &self.insts[inst].module.items[bi] else { unreachable!() };
        if !self.blocks_in_progress.insert(key) {
            return Err(err(
                DiagCode::Cycle,
                b.span,
                format!("combinational cycle through always block at line {} in '{}'", b.span.line, self.insts[inst].path),
            ));
        }
        let mut st = SymState::default();
        let outputs = b.body.assigned_names();
        for n in &outputs {
            st.vals.insert(n.clone(), None);
        }
        let st = self.exec(inst, &b.body, NetExpr::konst(1, 1), st, true)?;
        for n in outputs {
            let v = st.vals[&n].clone().ok_or_else(|| {
                err(
                    DiagCode::Latch,
                    b.span,
                    format!("'{n}' is not assigned on every path of the combinational block (latch)"),
                )
            })?;
            self.memo.insert((inst, n), v);
        }
        self.blocks_in_progress.remove(&key);
        self.blocks_done.insert(key);
        Ok(())
    }

    /// Next-state expressions and reset values for the registers of one clocked block.
    #[allow(clippy::type_complexity)]
    fn clocked_block(
        &mut self,
        inst: usize,
        b: &AlwaysBlock,
    ) -> Result<(Vec<(String, NetExpr)>, Vec<(String, u64)>), Diagnostic> {
        let st = self.exec(inst, &b.body, NetExpr::konst(1, 1), SymState::default(), false)?;
        let mut next = Vec::new();
        for name in b.body.assigned_names() {
            let width = self.insts[inst].scope.widths[&name];
            let v = match (st.nb.get(&name), st.vals.get(&name)) {
                (Some(_), Some(_)) => {
                    return Err(err(
                        DiagCode::Unsupported,
                        b.span,
                        format!("unsupported construct: '{name}' mixes blocking and non-blocking assignment"),
                    ))
                }
                (Some(v), None) => v.clone(),
                (None, Some(v)) => v.clone().expect("clocked values are always defined"),
                (None, None) => unreachable!(),
            };
            next.push((name, v.zext(width)));
        }
        Ok((next, self.reset_values(inst, &b.body)?))
    }

    /// Constants assigned by a leading `if (rst)` branch, where `rst` is a
    /// primary input.
    fn reset_values(&mut self, inst: usize, body: &Stmt) -> Result<Vec<(String, u64)>, Diagnostic> {
        let mut s = body;
        while let Stmt::Block(items) = s {
            if items.len() != 1 {
                return Ok(Vec::new());
            }
            s = &items[0];
        }
        let Stmt::If { cond, then, .. } = s else { return Ok(Vec::new()) };
        let Expr::Ident { path, span } = cond else { return Ok(Vec::new()) };
        if self.insts[inst].scope.is_param(&path[0]) {
            return Ok(Vec::new());
        }
        let v = self.value(inst, &path[0], *span)?;
        let n_state = self.state_slots.len();
        if !matches!(v.op(), super::netlist::NetOp::Slot(i) if *i >= n_state) {
            return Ok(Vec::new());
        }
        let mut assigns = Vec::new();
        let mut ok = true;
        then.walk(&mut |t| match t {
            Stmt::Assign { lhs, rhs, .. } => assigns.push((lhs.clone(), rhs.clone())),
            Stmt::Block(_) | Stmt::Null => {}
            _ => ok = false,
        });
        if !ok {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for (lhs, rhs) in assigns {
            let v = self.lower(inst, &rhs, None)?;
            match v.as_const() {
                Some(c) => out.push((lhs, c)),
                None => return Ok(Vec::new()),
            }
        }
        Ok(out)
    }

    fn exec(&mut self, inst: usize, s: &Stmt, path: NetExpr, mut st: SymState, comb: bool) -> Result<SymState, Diagnostic> {
        match s {
            Stmt::Null => Ok(st),
            Stmt::Block(items) => {
                for i in items {
                    st = self.exec(inst, i, path.clone(), st, comb)?;
                }
                Ok(st)
            }
            Stmt::Assign {
                lhs,
                rhs,
                blocking,
                id,
                span,
            } => {
                self.guards.entry(*id).or_default().push(path);
                let width = *self.insts[inst].scope.widths.get(lhs).ok_or_else(|| {
                    err(DiagCode::Undeclared, *span, format!("'{lhs}' is not declared"))
                })?;
                let v = fit(self.lower(inst, rhs, Some(&st))?, width, lhs, *span)?;
                if *blocking {
                    st.vals.insert(lhs.clone(), Some(v));
                } else if comb {
                    return Err(err(
                        DiagCode::Unsupported,
                        *span,
                        "unsupported construct: non-blocking assignment in a combinational block",
                    ));
                } else {
                    st.nb.insert(lhs.clone(), v);
                }
                Ok(st)
            }
            Stmt::If {
                cond,
                then,
                then_arm,
                els,
                ..
            } => {
                let c = self.lower(inst, cond, Some(&st))?.to_bool();
                let pt = NetExpr::and(path.clone(), c.clone());
                let pe = NetExpr::and(path, NetExpr::not(c.clone()));
                self.guards.entry(*then_arm).or_default().push(pt.clone());
                let a = self.exec(inst, then, pt, st.clone(), comb)?;
                let b = match els {
                    Some((id, e)) => {
                        self.guards.entry(*id).or_default().push(pe.clone());
                        self.exec(inst, e, pe, st, comb)?
                    }
                    None => st,
                };
                self.merge(inst, c, a, b)
            }
            Stmt::Case { subject, arms, .. } => {
                let subj = self.lower(inst, subject, Some(&st))?;
                let mut taken = NetExpr::konst(0, 1);
                let mut branches = Vec::new();
                let mut default = None;
                for arm in arms {
                    if arm.labels.is_empty() {
                        default = Some(arm);
                        continue;
                    }
                    let mut hit = NetExpr::konst(0, 1);
                    for l in &arm.labels {
                        let lv = self.lower(inst, l, Some(&st))?;
                        hit = NetExpr::or(hit, NetExpr::binary(crate::syntax::BinaryOp::Eq, subj.clone(), lv));
                    }
                    let cond = NetExpr::and(hit, NetExpr::not(taken.clone()));
                    taken = NetExpr::or(taken, cond.clone());
                    let p = NetExpr::and(path.clone(), cond.clone());
                    self.guards.entry(arm.id).or_default().push(p.clone());
                    let out = self.exec(inst, &arm.body, p, st.clone(), comb)?;
                    branches.push((cond, out));
                }
                let mut acc = match default {
                    Some(arm) => {
                        let p = NetExpr::and(path, NetExpr::not(taken));
                        self.guards.entry(arm.id).or_default().push(p.clone());
                        self.exec(inst, &arm.body, p, st, comb)?
                    }
                    None => st,
                };
                for (cond, out) in branches.into_iter().rev() {
                    acc = self.merge(inst, cond, out, acc)?;
                }
                Ok(acc)
            }
        }
    }

    fn merge(&mut self, inst: usize, c: NetExpr, a: SymState, b: SymState) -> Result<SymState, Diagnostic> {
        let mut out = SymState::default();
        let keys: BTreeSet<String> = a.vals.keys().chain(b.vals.keys()).cloned().collect();
        for k in keys {
            let va = match a.vals.get(&k) {
                Some(v) => v.clone(),
                None => Some(self.value(inst, &k, Span::default())?),
            };
            let vb = match b.vals.get(&k) {
                Some(v) => v.clone(),
                None => Some(self.value(inst, &k, Span::default())?),
            };
            let v = match (va, vb) {
                (Some(x), Some(y)) => Some(NetExpr::mux(c.clone(), x, y)),
                _ => None,
            };
            out.vals.insert(k, v);
        }
        let keys: BTreeSet<String> = a.nb.keys().chain(b.nb.keys()).cloned().collect();
        for k in keys {
            let x = match a.nb.get(&k) {
                Some(v) => v.clone(),
                None => self.value(inst, &k, Span::default())?,
            };
            let y = match b.nb.get(&k) {
                Some(v) => v.clone(),
                None => self.value(inst, &k, Span::default())?,
            };
            out.nb.insert(k, NetExpr::mux(c.clone(), x, y));
        }
        Ok(out)
    }
}

fn fit(v: NetExpr, width: u32, name: &str, span: Span) -> Result<NetExpr, Diagnostic> {
    if v.width() > width {
        return Err(err(
            DiagCode::Width,
            span,
            format!("{}-bit value assigned to {width}-bit '{name}'", v.width()),
        ));
    }
    Ok(v.zext(width))
}
