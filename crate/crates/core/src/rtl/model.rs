// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::syntax::expr::{mask, min_width};
use crate::syntax::{BinaryOp, DiagCode, Diagnostic, Diagnostics, Expr, Span, UnaryOp};

use super::ast::{self, AlwaysKind, Direction, Item, Module, NetKind, SourceFile, Stmt};

/// RTL metadata: module hierarchy, ports, signals, parameters, FSM
/// encodings and the statement table used for coverage.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DesignModel {
    /// The unique root module, when exactly one module is never instantiated.
    #[serde(default)]
    pub top: Option<String>,
    pub modules: Vec<ModuleDecl>,
    #[serde(default)]
    pub fsms: Vec<FsmDesc>,
    #[serde(default)]
    pub statements: Vec<StatementRef>,
    /// Flattened signal paths below every root module.
    #[serde(default)]
    pub hierarchy: Vec<HierSignal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleDecl {
    pub name: String,
    pub line: u32,
    pub ports: Vec<PortInfo>,
    pub signals: Vec<SignalInfo>,
    pub parameters: Vec<ParamInfo>,
    pub instances: Vec<InstanceInfo>,
    #[serde(default)]
    pub clocks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortInfo {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Wire,
    Reg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalInfo {
    pub name: String,
    pub width: u32,
    pub kind: SignalKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub value: u64,
    #[serde(default)]
    pub width: Option<u32>,
    pub local: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub name: String,
    pub module: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmDesc {
    pub module: String,
    pub state_register: String,
    pub encoding: BTreeMap<String, u64>,
    pub transition_lines: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Assign,
    BranchArm,
    SeqAssign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementRef {
    pub id: String,
    pub module: String,
    pub line: u32,
    pub kind: StatementKind,
    /// `true` for `else` and `default` arms.
    #[serde(default)]
    pub fallback_arm: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierSignal {
    pub path: String,
    pub module: String,
    pub name: String,
    pub width: u32,
    #[serde(default)]
    pub direction: Option<Direction>,
    pub kind: SignalKind,
}

/// A parsed design: the serializable metadata plus the syntax tree the
/// elaborator works from.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub model: DesignModel,
    pub ast: SourceFile,
}

impl DesignModel {
    pub fn module(&self, name: &str) -> Option<&ModuleDecl> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn statement(&self, id: &str) -> Option<&StatementRef> {
        self.statements.iter().find(|s| s.id == id)
    }

    /// Width of a flattened signal path.
    pub fn signal_width(&self, path: &str) -> Option<u32> {
        self.hierarchy.iter().find(|h| h.path == path).map(|h| h.width)
    }

    /// Clock of the top module, if it has exactly one.
    pub fn top_clock(&self) -> Option<&str> {
        let top = self.module(self.top.as_deref()?)?;
        match top.clocks.as_slice() {
            [c] => Some(c),
            _ => None,
        }
    }

    /// Structural invariants; empty when the model is well-formed.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        for m in &self.modules {
            let mut seen = BTreeSet::new();
            for n in m.ports.iter().map(|p| &p.name).chain(m.signals.iter().map(|s| &s.name)) {
                if !seen.insert(n) {
                    out.push(format!("modules.{}: duplicate name '{n}'", m.name));
                }
            }
            for i in &m.instances {
                if self.module(&i.module).is_none() {
                    out.push(format!("modules.{}.instances.{}: unknown module '{}'", m.name, i.name, i.module));
                }
            }
        }
        for f in &self.fsms {
            let ok = self.module(&f.module).is_some_and(|m| {
                m.signals.iter().any(|s| s.name == f.state_register)
                    || m.ports.iter().any(|p| p.name == f.state_register)
            });
            if !ok {
                out.push(format!("fsms: state register '{}' not declared in '{}'", f.state_register, f.module));
            }
        }
        let mut ids = BTreeSet::new();
        for s in &self.statements {
            if !ids.insert(&s.id) {
                out.push(format!("statements: duplicate id '{}'", s.id));
            }
        }
        out
    }
}

/// Parameter values and declared widths of one module under one set of
/// parameter overrides.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub params: BTreeMap<String, (u64, Option<u32>)>,
    pub widths: BTreeMap<String, u32>,
}

impl Scope {
    pub fn build(m: &Module, overrides: &BTreeMap<String, u64>) -> Result<Scope, Diagnostic> {
        let mut scope = Scope::default();
        for p in &m.params {
            let v = match overrides.get(&p.name) {
                Some(v) if !p.local => (*v, None),
                _ => {
                    let v = scope.const_eval(&p.value)?;
                    let w = match &p.value {
                        Expr::Number { width, .. } => *width,
                        _ => None,
                    };
                    (v, w)
                }
            };
            scope.params.insert(p.name.clone(), v);
        }
        for port in &m.ports {
            if port.span.line == 0 {
                return Err(Diagnostic::error(
                    DiagCode::Syntax,
                    m.span.line,
                    m.span.col,
                    format!("port '{}' has no direction declaration", port.name),
                ));
            }
            let w = scope.range_width(m.range_of(&port.name).flatten(), port.span)?;
            scope.widths.insert(port.name.clone(), w);
        }
        for n in &m.nets {
            if m.port(&n.name).is_some() {
                continue;
            }
            if scope.params.contains_key(&n.name) {
                return Err(Diagnostic::error(
                    DiagCode::Duplicate,
                    n.span.line,
                    n.span.col,
                    format!("'{}' is both a parameter and a net", n.name),
                ));
            }
            let w = scope.range_width(n.range.as_ref(), n.span)?;
            scope.widths.insert(n.name.clone(), w);
        }
        Ok(scope)
    }

    fn range_width(&self, r: Option<&ast::Range>, span: Span) -> Result<u32, Diagnostic> {
        let Some(r) = r else { return Ok(1) };
        let msb = self.const_eval(&r.msb)?;
        let lsb = self.const_eval(&r.lsb)?;
        if lsb != 0 || msb < lsb {
            return Err(Diagnostic::error(
                DiagCode::Unsupported,
                span.line,
                span.col,
                "unsupported construct: ranges must have the form [msb:0]",
            ));
        }
        if msb >= 64 {
            return Err(Diagnostic::error(
                DiagCode::Unsupported,
                span.line,
                span.col,
                "unsupported construct: signals wider than 64 bits",
            ));
        }
        Ok(msb as u32 + 1)
    }

    pub fn is_param(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    /// Evaluate a constant expression over parameters.
    pub fn const_eval(&self, e: &Expr) -> Result<u64, Diagnostic> {
        let err = |msg: String| {
            let s = e.span().unwrap_or_default();
            Diagnostic::error(DiagCode::Syntax, s.line, s.col, msg)
        };
        Ok(match e {
            Expr::Number { value, .. } => *value,
            Expr::Ident { path, .. } => match self.params.get(&path[0]) {
                Some((v, _)) if path.len() == 1 => *v,
                _ => return Err(err(format!("'{}' is not a constant", path.join(".")))),
            },
            Expr::Unary { op, arg } => {
                let a = self.const_eval(arg)?;
                match op {
                    UnaryOp::Neg => a.wrapping_neg(),
                    UnaryOp::LogNot => (a == 0) as u64,
                    UnaryOp::Not => !a,
                    _ => return Err(err("reduction operator in constant expression".into())),
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (self.const_eval(lhs)?, self.const_eval(rhs)?);
                match op {
                    BinaryOp::Add => a.wrapping_add(b),
                    BinaryOp::Sub => a.wrapping_sub(b),
                    BinaryOp::And => a & b,
                    BinaryOp::Or => a | b,
                    BinaryOp::Xor => a ^ b,
                    BinaryOp::Shl => a.checked_shl(b as u32).unwrap_or(0),
                    BinaryOp::Shr => a.checked_shr(b as u32).unwrap_or(0),
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
            Expr::Ternary { cond, then, els } => {
                if self.const_eval(cond)? != 0 {
                    self.const_eval(then)?
                } else {
                    self.const_eval(els)?
                }
            }
            _ => return Err(err(format!("'{e}' is not a constant expression"))),
        })
    }

    /// Width a parameter contributes to expressions.
    pub fn param_width(&self, name: &str) -> Option<u32> {
        self.params
            .get(name)
            .map(|(v, w)| w.unwrap_or_else(|| min_width(*v)))
    }

    pub fn param_value(&self, name: &str) -> Option<u64> {
        self.params.get(name).map(|(v, w)| v & mask(w.unwrap_or(64)))
    }
}

pub(crate) fn build_model(ast: &SourceFile) -> Result<DesignModel, Diagnostics> {
    let mut diags = Diagnostics::new();
    let mut modules = Vec::new();
    let mut names = BTreeSet::new();
    for m in &ast.modules {
        if !names.insert(m.name.clone()) {
            diags.push(Diagnostic::error(
                DiagCode::Duplicate,
                m.span.line,
                m.span.col,
                format!("module '{}' defined twice", m.name),
            ));
            continue;
        }
        match module_decl(m, ast) {
            Ok(d) => modules.push(d),
            Err(d) => diags.push(d),
        }
    }
    if diags.has_errors() {
        return Err(diags);
    }

    let instantiated: BTreeSet<&str> = modules
        .iter()
        .flat_map(|m| m.instances.iter().map(|i| i.module.as_str()))
        .collect();
    let roots: Vec<&str> = modules
        .iter()
        .map(|m| m.name.as_str())
        .filter(|n| !instantiated.contains(n))
        .collect();

    let mut hierarchy = Vec::new();
    for root in &roots {
        if let Err(d) = flatten(ast, root, root, &BTreeMap::new(), &mut Vec::new(), &mut hierarchy) {
            diags.push(d);
        }
    }
    if !modules.is_empty() && roots.is_empty() {
        diags.push(Diagnostic::error(DiagCode::Cycle, 1, 1, "every module is instantiated: recursive hierarchy"));
    }
    if diags.has_errors() {
        return Err(diags);
    }
    hierarchy.sort_by(|a, b| a.path.cmp(&b.path));

    Ok(DesignModel {
        top: (roots.len() == 1).then(|| roots[0].to_string()),
        fsms: ast.modules.iter().flat_map(detect_module_fsms).collect(),
        statements: statement_index(ast),
        modules,
        hierarchy,
    })
}

fn module_decl(m: &Module, ast: &SourceFile) -> Result<ModuleDecl, Diagnostic> {
    let scope = Scope::build(m, &BTreeMap::new())?;
    let regs = assigned_in_always(m);
    let mut clocks: Vec<String> = Vec::new();
    let mut instances = Vec::new();
    for item in &m.items {
        match item {
            Item::Always(a) => {
                if let AlwaysKind::Clocked { clock } = &a.kind {
                    if !clocks.contains(clock) {
                        clocks.push(clock.clone());
                    }
                }
            }
            Item::Instance(i) => {
                if ast.module(&i.module).is_none() {
                    return Err(Diagnostic::error(
                        DiagCode::UnresolvedInstance,
                        i.span.line,
                        i.span.col,
                        format!("instance '{}' of unknown module '{}'", i.name, i.module),
                    ));
                }
                if instances.iter().any(|x: &InstanceInfo| x.name == i.name) || scope.widths.contains_key(&i.name) {
                    return Err(Diagnostic::error(
                        DiagCode::Duplicate,
                        i.span.line,
                        i.span.col,
                        format!("instance name '{}' already used", i.name),
                    ));
                }
                instances.push(InstanceInfo {
                    name: i.name.clone(),
                    module: i.module.clone(),
                    line: i.span.line,
                });
            }
            Item::Assign(_) => {}
        }
    }
    Ok(ModuleDecl {
        name: m.name.clone(),
        line: m.span.line,
        ports: m
            .ports
            .iter()
            .map(|p| PortInfo {
                name: p.name.clone(),
                direction: p.dir,
                width: scope.widths[&p.name],
            })
            .collect(),
        signals: m
            .nets
            .iter()
            .filter(|n| m.port(&n.name).is_none())
            .map(|n| SignalInfo {
                name: n.name.clone(),
                width: scope.widths[&n.name],
                kind: if n.kind == NetKind::Reg || regs.contains(&n.name) {
                    SignalKind::Reg
                } else {
                    SignalKind::Wire
                },
            })
            .collect(),
        parameters: m
            .params
            .iter()
            .map(|p| {
                let (value, width) = scope.params[&p.name];
                ParamInfo {
                    name: p.name.clone(),
                    value,
                    width,
                    local: p.local,
                }
            })
            .collect(),
        instances,
        clocks,
    })
}

fn flatten(
    ast: &SourceFile,
    module: &str,
    path: &str,
    overrides: &BTreeMap<String, u64>,
    stack: &mut Vec<String>,
    out: &mut Vec<HierSignal>,
) -> Result<(), Diagnostic> {
    let m = ast.module(module).expect("checked by module_decl");
    if stack.iter().any(|s| s == module) {
        return Err(Diagnostic::error(
            DiagCode::Cycle,
            m.span.line,
            m.span.col,
            format!("recursive instantiation of '{module}'"),
        ));
    }
    stack.push(module.to_string());
    let scope = Scope::build(m, overrides)?;
    let regs = assigned_in_always(m);
    for p in &m.ports {
        out.push(HierSignal {
            path: format!("{path}.{}", p.name),
            module: module.to_string(),
            name: p.name.clone(),
            width: scope.widths[&p.name],
            direction: Some(p.dir),
            kind: if p.is_reg || regs.contains(&p.name) {
                SignalKind::Reg
            } else {
                SignalKind::Wire
            },
        });
    }
    for n in m.nets.iter().filter(|n| m.port(&n.name).is_none()) {
        out.push(HierSignal {
            path: format!("{path}.{}", n.name),
            module: module.to_string(),
            name: n.name.clone(),
            width: scope.widths[&n.name],
            direction: None,
            kind: if n.kind == NetKind::Reg || regs.contains(&n.name) {
                SignalKind::Reg
            } else {
                SignalKind::Wire
            },
        });
    }
    for item in &m.items {
        if let Item::Instance(i) = item {
            let mut ov = BTreeMap::new();
            for (name, e) in &i.params {
                ov.insert(name.clone(), scope.const_eval(e)?);
            }
            flatten(ast, &i.module, &format!("{path}.{}", i.name), &ov, stack, out)?;
        }
    }
    stack.pop();
    Ok(())
}

/// Names assigned inside any always block of `m`.
pub(crate) fn assigned_in_always(m: &Module) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for item in &m.items {
        if let Item::Always(a) = item {
            out.extend(a.body.assigned_names());
        }
    }
    out
}

/// Names assigned in clocked always blocks: the module's registers.
pub(crate) fn clocked_registers(m: &Module) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for item in &m.items {
        if let Item::Always(a) = item {
            if matches!(a.kind, AlwaysKind::Clocked { .. }) {
                out.extend(a.body.assigned_names());
            }
        }
    }
    out
}

/// One entry per continuous assign, branch arm and procedural assignment.
pub fn statement_index(ast: &SourceFile) -> Vec<StatementRef> {
    let mut out = Vec::new();
    for m in &ast.modules {
        for item in &m.items {
            match item {
                Item::Assign(a) => out.push(StatementRef {
                    id: a.id.label(),
                    module: m.name.clone(),
                    line: a.span.line,
                    kind: StatementKind::Assign,
                    fallback_arm: false,
                }),
                Item::Always(a) => a.body.walk(&mut |s| match s {
                    Stmt::If {
                        then_arm, els, span, ..
                    } => {
                        out.push(StatementRef {
                            id: then_arm.label(),
                            module: m.name.clone(),
                            line: span.line,
                            kind: StatementKind::BranchArm,
                            fallback_arm: false,
                        });
                        if let Some((id, body)) = els {
                            out.push(StatementRef {
                                id: id.label(),
                                module: m.name.clone(),
                                line: stmt_line(body).unwrap_or(span.line),
                                kind: StatementKind::BranchArm,
                                fallback_arm: true,
                            });
                        }
                    }
                    Stmt::Case { arms, .. } => {
                        for arm in arms {
                            out.push(StatementRef {
                                id: arm.id.label(),
                                module: m.name.clone(),
                                line: arm.span.line,
                                kind: StatementKind::BranchArm,
                                fallback_arm: arm.labels.is_empty(),
                            });
                        }
                    }
                    Stmt::Assign { id, span, .. } => out.push(StatementRef {
                        id: id.label(),
                        module: m.name.clone(),
                        line: span.line,
                        kind: StatementKind::SeqAssign,
                        fallback_arm: false,
                    }),
                    Stmt::Block(_) | Stmt::Null => {}
                }),
                Item::Instance(_) => {}
            }
        }
    }
    out.sort_by_key(|s| s.id[1..].parse::<u32>().unwrap_or(u32::MAX));
    out
}

fn stmt_line(s: &Stmt) -> Option<u32> {
    match s {
        Stmt::Assign { span, .. } | Stmt::If { span, .. } | Stmt::Case { span, .. } => Some(span.line),
        Stmt::Block(items) => items.iter().find_map(stmt_line),
        Stmt::Null => None,
    }
}

/// Registers that are compared or case-switched only against named local
/// parameters and assigned only those parameters.
pub fn detect_fsms(ast: &SourceFile) -> Vec<FsmDesc> {
    ast.modules.iter().flat_map(detect_module_fsms).collect()
}

fn detect_module_fsms(m: &Module) -> Vec<FsmDesc> {
    let localparams: BTreeMap<&str, &Expr> = m
        .params
        .iter()
        .filter(|p| p.local)
        .map(|p| (p.name.as_str(), &p.value))
        .collect();
    let Ok(scope) = Scope::build(m, &BTreeMap::new()) else {
        return Vec::new();
    };
    let regs = clocked_registers(m);

    #[derive(Default)]
    struct Use {
        compared: bool,
        disqualified: bool,
        consts: BTreeSet<String>,
        lines: BTreeSet<u32>,
    }
    let mut uses: BTreeMap<String, Use> = regs.iter().map(|r| (r.clone(), Use::default())).collect();

    let as_reg = |e: &Expr| -> Option<String> {
        match e {
            Expr::Ident { path, .. } if path.len() == 1 && regs.contains(&path[0]) => Some(path[0].clone()),
            _ => None,
        }
    };
    let as_const = |e: &Expr| -> Option<String> {
        match e {
            Expr::Ident { path, .. } if path.len() == 1 && localparams.contains_key(path[0].as_str()) => {
                Some(path[0].clone())
            }
            _ => None,
        }
    };

    let visit_expr = |e: &Expr, uses: &mut BTreeMap<String, Use>| {
        e.walk(&mut |n| {
            if let Expr::Binary { op, lhs, rhs } = n {
                if op.is_comparison() {
                    for (a, b) in [(lhs, rhs), (rhs, lhs)] {
                        if let Some(r) = as_reg(a) {
                            let u = uses.get_mut(&r).unwrap();
                            u.compared = true;
                            match as_const(b) {
                                Some(c) => {
                                    u.consts.insert(c);
                                }
                                None => u.disqualified = true,
                            }
                        }
                    }
                }
            }
        });
    };

    for item in &m.items {
        match item {
            Item::Assign(a) => visit_expr(&a.rhs, &mut uses),
            Item::Instance(i) => {
                for e in i.conns.iter().filter_map(|(_, e)| e.as_ref()) {
                    visit_expr(e, &mut uses);
                }
            }
            Item::Always(a) => a.body.walk(&mut |s| match s {
                Stmt::If { cond, .. } => visit_expr(cond, &mut uses),
                Stmt::Case { subject, arms, .. } => {
                    visit_expr(subject, &mut uses);
                    let sr = as_reg(subject);
                    for arm in arms {
                        for l in &arm.labels {
                            visit_expr(l, &mut uses);
                            if let Some(r) = &sr {
                                let u = uses.get_mut(r).unwrap();
                                u.compared = true;
                                match as_const(l) {
                                    Some(c) => {
                                        u.consts.insert(c);
                                    }
                                    None => u.disqualified = true,
                                }
                            }
                        }
                    }
                }
                Stmt::Assign { lhs, rhs, span, .. } => {
                    visit_expr(rhs, &mut uses);
                    if let Some(u) = uses.get_mut(lhs) {
                        u.lines.insert(span.line);
                        match as_const(rhs) {
                            Some(c) => {
                                u.consts.insert(c);
                            }
                            None => u.disqualified = true,
                        }
                    }
                }
                Stmt::Block(_) | Stmt::Null => {}
            }),
        }
    }

    // declaration order
    let order: Vec<&str> = m
        .ports
        .iter()
        .map(|p| p.name.as_str())
        .chain(m.nets.iter().map(|n| n.name.as_str()))
        .collect();
    let mut out = Vec::new();
    for name in order {
        let Some(u) = uses.get(name) else { continue };
        if !u.compared || u.disqualified {
            continue;
        }
        out.push(FsmDesc {
            module: m.name.clone(),
            state_register: name.to_string(),
            encoding: u
                .consts
                .iter()
                .map(|c| (c.clone(), scope.param_value(c).unwrap_or(0)))
                .collect(),
            transition_lines: u.lines.iter().copied().collect(),
        });
        uses.remove(name);
    }
    out
}
