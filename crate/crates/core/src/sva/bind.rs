// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kg::SignalIndex;
use crate::rtl::DesignModel;
use crate::syntax::expr::min_width;
use crate::syntax::{BinaryOp, Expr, Span, SysFunc, UnaryOp};

use super::ast::{PropAst, PropKind, PropertyDecl, PropertyFile};
use super::parser::{parse_macro_body, DEFAULT_MAX_DELAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindErrorKind {
    UndeclaredIdentifier,
    UndefinedMacro,
    WidthMismatch,
    AmbiguousPath,
}

impl fmt::Display for BindErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BindErrorKind::UndeclaredIdentifier => "undeclared_identifier",
            BindErrorKind::UndefinedMacro => "undefined_macro",
            BindErrorKind::WidthMismatch => "width_mismatch",
            BindErrorKind::AmbiguousPath => "ambiguous_path",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindError {
    pub prop_id: String,
    pub identifier: String,
    pub line: u32,
    pub kind: BindErrorKind,
    /// Candidate paths for `ambiguous_path`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
    pub message: String,
}

impl fmt::Display for BindError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.prop_id, self.line, self.kind, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}", render_items(.items))]
pub struct BindErrors {
    pub items: Vec<BindError>,
}

fn render_items(items: &[BindError]) -> String {
    items.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")
}

impl BindErrors {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn for_prop<'a>(&'a self, prop_id: &'a str) -> impl Iterator<Item = &'a BindError> + 'a {
        self.items.iter().filter(move |e| e.prop_id == prop_id)
    }
}

/// A property with macros expanded and every identifier replaced by a full
/// hierarchical signal path.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundProperty {
    pub prop_id: String,
    pub kind: PropKind,
    /// First source line, used as the violation line of counterexamples.
    pub line: u32,
    pub ast: PropAst,
    pub clock: String,
}

impl BoundProperty {
    pub fn has_implication(&self) -> bool {
        self.ast.antecedent.is_some()
    }
}

/// Bind every property; any failure fails the whole file.
pub fn bind(f: &PropertyFile, m: &DesignModel, idx: &SignalIndex) -> Result<Vec<BoundProperty>, BindErrors> {
    let mut bound = Vec::new();
    let mut errors = BindErrors::default();
    for r in bind_each(f, m, idx) {
        match r {
            Ok(b) => bound.push(b),
            Err(e) => errors.items.extend(e.items),
        }
    }
    if errors.is_empty() {
        Ok(bound)
    } else {
        Err(errors)
    }
}

/// Per-property binding results, in file order.
pub fn bind_each(f: &PropertyFile, m: &DesignModel, idx: &SignalIndex) -> Vec<Result<BoundProperty, BindErrors>> {
    f.properties.iter().map(|p| bind_one(f, p, m, idx)).collect()
}

pub fn bind_one(f: &PropertyFile, p: &PropertyDecl, m: &DesignModel, idx: &SignalIndex) -> Result<BoundProperty, BindErrors> {
    let mut b = Binder {
        f,
        m,
        idx,
        prop: p,
        errors: Vec::new(),
    };
    let clock_name = p.ast.clock.clone().or_else(|| f.clocking.clone());
    let clock = match clock_name {
        Some(c) => b.resolve_path(&c, Span::default()).map(|parts| parts.join(".")),
        None => {
            b.error(BindErrorKind::UndeclaredIdentifier, "", Span::default(), "property has no clock".into());
            None
        }
    };
    let ast = p.ast.clone().map_exprs(&mut |e| b.expand(e));
    if b.errors.is_empty() {
        for e in ast.exprs() {
            b.check_bool_expr(e);
        }
    }
    if !b.errors.is_empty() {
        return Err(BindErrors { items: b.errors });
    }
    let clock = clock.expect("resolved when no errors");
    Ok(BoundProperty {
        prop_id: p.prop_id.clone(),
        kind: p.kind,
        line: p.lines.0,
        ast: PropAst {
            clock: Some(clock.clone()),
            ..ast
        },
        clock,
    })
}

struct Binder<'a> {
    f: &'a PropertyFile,
    m: &'a DesignModel,
    idx: &'a SignalIndex,
    prop: &'a PropertyDecl,
    errors: Vec<BindError>,
}

impl Binder<'_> {
    fn line(&self, s: Span) -> u32 {
        if s.line > 0 {
            s.line
        } else {
            self.prop.lines.0
        }
    }

    fn error(&mut self, kind: BindErrorKind, ident: &str, at: Span, message: String) {
        self.push(kind, ident, at, message, Vec::new());
    }

    fn push(&mut self, kind: BindErrorKind, ident: &str, at: Span, message: String, candidates: Vec<String>) {
        let e = BindError {
            prop_id: self.prop.prop_id.clone(),
            identifier: ident.to_string(),
            line: self.line(at),
            kind,
            candidates,
            message,
        };
        if !self.errors.contains(&e) {
            self.errors.push(e);
        }
    }

    fn resolve_path(&mut self, mention: &str, at: Span) -> Option<Vec<String>> {
        let found = exact_or_suffix(self.m, self.idx, mention);
        match found.len() {
            1 => Some(found[0].split('.').map(str::to_string).collect()),
            0 => {
                self.error(
                    BindErrorKind::UndeclaredIdentifier,
                    mention,
                    at,
                    format!("'{mention}' does not name a design signal"),
                );
                None
            }
            _ => {
                let msg = format!("'{mention}' matches {} signals: {}", found.len(), found.join(", "));
                self.push(BindErrorKind::AmbiguousPath, mention, at, msg, found);
                None
            }
        }
    }

    /// Expand macros one level and resolve identifiers.
    fn expand(&mut self, e: Expr) -> Expr {
        let mut undefined = Vec::new();
        let e = e.rewrite(&mut |x| match x {
            Expr::Macro { name, span } => match self.f.macro_body(&name).map(parse_macro_body) {
                Some(Ok(body)) => relocate(body, span),
                Some(Err(_)) | None => {
                    self.error(BindErrorKind::UndefinedMacro, &name, span, format!("macro '{name}' is not defined"));
                    undefined.push(span);
                    Expr::Macro { name, span }
                }
            },
            other => other,
        });
        e.rewrite(&mut |x| match x {
            Expr::Ident { path, span } => {
                let mention = path.join(".");
                if exact_or_suffix(self.m, self.idx, &mention).is_empty() {
                    if let Some((v, w)) = param_lookup(self.m, &mention) {
                        return Expr::Number { value: v, width: Some(w) };
                    }
                }
                match self.resolve_path(&mention, span) {
                    Some(full) => Expr::Ident { path: full, span },
                    None => Expr::Ident { path, span },
                }
            }
            Expr::Macro { name, span } if undefined.contains(&span) => Expr::Macro { name, span },
            Expr::Macro { name, span } => {
                // a macro left behind by expansion refers to another macro
                self.error(
                    BindErrorKind::UndefinedMacro,
                    &name,
                    span,
                    format!("macro '{name}' cannot be expanded inside another macro"),
                );
                Expr::Macro { name, span }
            }
            other => other,
        })
    }

    fn check_bool_expr(&mut self, e: &Expr) {
        let _ = self.width(e);
    }

    fn width(&mut self, e: &Expr) -> Option<u32> {
        Some(match e {
            Expr::Number { value, width } => width.unwrap_or_else(|| min_width(*value)),
            Expr::Ident { path, span } => match self.idx.width(&path.join(".")) {
                Some(w) => w,
                None => {
                    self.error(
                        BindErrorKind::UndeclaredIdentifier,
                        &path.join("."),
                        *span,
                        format!("'{}' does not name a design signal", path.join(".")),
                    );
                    return None;
                }
            },
            Expr::Macro { .. } => return None,
            Expr::Unary { op, arg } => {
                let w = self.width(arg)?;
                match op {
                    UnaryOp::Not | UnaryOp::Neg => w,
                    _ => 1,
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = self.width(lhs);
                let b = self.width(rhs);
                let (a, b) = (a?, b?);
                if op.is_comparison() {
                    self.check_compare(*op, lhs, a, rhs, b);
                    1
                } else {
                    match op {
                        BinaryOp::LogAnd | BinaryOp::LogOr => 1,
                        BinaryOp::Shl | BinaryOp::Shr => a,
                        _ => a.max(b),
                    }
                }
            }
            Expr::Ternary { cond, then, els } => {
                let c = self.width(cond);
                let t = self.width(then);
                let f = self.width(els);
                c?;
                t?.max(f?)
            }
            Expr::Concat(items) => {
                let mut total = 0;
                for i in items {
                    total += self.width(i)?;
                }
                if total > 64 {
                    self.error(
                        BindErrorKind::WidthMismatch,
                        &e.to_string(),
                        e.span().unwrap_or_default(),
                        format!("concatenation is {total} bits; at most 64 are supported"),
                    );
                    return None;
                }
                total
            }
            Expr::Select { base, msb, lsb } => {
                let w = self.width(base)?;
                let hi = const_value(msb);
                let lo = match lsb {
                    Some(l) => const_value(l),
                    None => hi,
                };
                match (hi, lo) {
                    (Some(h), Some(l)) if l <= h && h < w as u64 => (h - l + 1) as u32,
                    _ => {
                        self.error(
                            BindErrorKind::WidthMismatch,
                            &e.to_string(),
                            e.span().unwrap_or_default(),
                            format!("select '{e}' is out of range for a {w}-bit value"),
                        );
                        return None;
                    }
                }
            }
            Expr::Call { func, args, span } => {
                let w = self.width(&args[0])?;
                if *func == SysFunc::Past {
                    if let Some(n) = args.get(1) {
                        match const_value(n) {
                            Some(k) if (1..=DEFAULT_MAX_DELAY as u64).contains(&k) => {}
                            _ => {
                                self.error(
                                    BindErrorKind::WidthMismatch,
                                    &e.to_string(),
                                    *span,
                                    format!("$past depth must be a constant between 1 and {DEFAULT_MAX_DELAY}"),
                                );
                                return None;
                            }
                        }
                    }
                    w
                } else {
                    1
                }
            }
        })
    }

    fn check_compare(&mut self, op: BinaryOp, lhs: &Expr, a: u32, rhs: &Expr, b: u32) {
        let fits = |lit: &Expr, other: u32| matches!(lit, Expr::Number { value, .. } if min_width(*value) <= other);
        let ok = a == b || fits(lhs, b) || fits(rhs, a);
        if !ok {
            let at = lhs.span().or(rhs.span()).unwrap_or_default();
            self.error(
                BindErrorKind::WidthMismatch,
                &format!("{lhs} {} {rhs}", op.symbol()),
                at,
                format!("'{}' compares a {a}-bit value with a {b}-bit value", Expr::binary(op, lhs.clone(), rhs.clone())),
            );
        }
    }
}

/// A full path, then the mention read in the top module's scope, then every
/// path ending with the mention.
pub fn exact_or_suffix(m: &DesignModel, idx: &SignalIndex, mention: &str) -> Vec<String> {
    if idx.width(mention).is_some() {
        return vec![mention.to_string()];
    }
    if let Some(top) = &m.top {
        let scoped = format!("{top}.{mention}");
        if idx.width(&scoped).is_some() {
            return vec![scoped];
        }
    }
    idx.resolve(mention)
}

fn const_value(e: &Expr) -> Option<u64> {
    match e {
        Expr::Number { value, .. } => Some(*value),
        _ => None,
    }
}

/// Give every identifier of an expanded macro body the position of the use.
fn relocate(e: Expr, at: Span) -> Expr {
    e.rewrite(&mut |x| match x {
        Expr::Ident { path, .. } => Expr::Ident { path, span: at },
        Expr::Call { func, args, .. } => Expr::Call { func, args, span: at },
        other => other,
    })
}

/// Parameter of the top module, or one whose value agrees across every
/// module declaring it.
fn param_lookup(m: &DesignModel, name: &str) -> Option<(u64, u32)> {
    let width = |p: &crate::rtl::ParamInfo| p.width.unwrap_or_else(|| min_width(p.value));
    if let Some(top) = m.top.as_deref().and_then(|t| m.module(t)) {
        if let Some(p) = top.parameters.iter().find(|p| p.name == name) {
            return Some((p.value, width(p)));
        }
    }
    let mut found: Option<(u64, u32)> = None;
    for md in &m.modules {
        if let Some(p) = md.parameters.iter().find(|p| p.name == name) {
            let v = (p.value, width(p));
            match found {
                None => found = Some(v),
                Some(f) if f.0 == v.0 => found = Some((f.0, f.1.max(v.1))),
                Some(_) => return None,
            }
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtl::parse_rtl;
    use crate::sva::parse_properties;

    const RTL: &str = "module leaf(input clk, input wr_en, output reg q);\n\
        always @(posedge clk) q <= wr_en;\nendmodule\n\
        module top(input clk, input wr_en, input [1:0] mode, output q0, output q1);\n\
        localparam IDLE = 2'd0;\n\
        leaf a(.clk(clk), .wr_en(wr_en), .q(q0));\n\
        leaf b(.clk(clk), .wr_en(wr_en), .q(q1));\nendmodule\n";

    fn setup(props: &str) -> (PropertyFile, DesignModel, SignalIndex) {
        let d = parse_rtl(RTL).unwrap();
        let idx = SignalIndex::from_design(&d.model);
        let src = format!("default clocking @(posedge clk); endclocking\n{props}");
        (parse_properties(&src).unwrap(), d.model, idx)
    }

    #[test]
    fn declared_ports_bind() {
        let (f, m, idx) = setup("P_1: assert property (top.wr_en |=> a.q);\nP_2: assert property (mode == IDLE |-> q0);\n");
        let b = bind(&f, &m, &idx).unwrap();
        assert_eq!(b[0].clock, "top.clk");
        assert_eq!(b[0].ast.to_string(), "@(posedge top.clk) top.wr_en |=> top.a.q");
        assert_eq!(b[1].ast.to_string(), "@(posedge top.clk) top.mode == 2'd0 |-> top.q0");
    }

    #[test]
    fn typo_is_undeclared_at_its_line() {
        let (f, m, idx) = setup("P_1: assert property (q0);\nP_2: assert property (wr_enn |=> q0);\n");
        let e = bind(&f, &m, &idx).unwrap_err();
        assert_eq!(e.items.len(), 1);
        assert_eq!(e.items[0].kind, BindErrorKind::UndeclaredIdentifier);
        assert_eq!(e.items[0].identifier, "wr_enn");
        assert_eq!(e.items[0].line, 3);
    }

    #[test]
    fn twin_instances_are_ambiguous() {
        let (f, m, idx) = setup("P_1: assert property (q);\n");
        let e = bind(&f, &m, &idx).unwrap_err();
        assert_eq!(e.items[0].kind, BindErrorKind::AmbiguousPath);
        assert_eq!(e.items[0].candidates, vec!["top.a.q", "top.b.q"]);
    }

    #[test]
    fn width_mismatch_detected() {
        let (f, m, idx) = setup("P_1: assert property (mode == 3'd5);\nP_2: assert property (mode == 3'd2);\nP_3: assert property (mode == wr_en);\n");
        let r = bind_each(&f, &m, &idx);
        assert_eq!(r[0].as_ref().unwrap_err().items[0].kind, BindErrorKind::WidthMismatch);
        assert!(r[1].is_ok());
        assert_eq!(r[2].as_ref().unwrap_err().items[0].kind, BindErrorKind::WidthMismatch);
    }

    #[test]
    fn undefined_macro_in_constructed_file() {
        let (mut f, m, idx) = setup("`define ON wr_en\nP_1: assert property (`ON);\n");
        assert!(bind(&f, &m, &idx).is_ok());
        f.macros.clear();
        let e = bind(&f, &m, &idx).unwrap_err();
        assert_eq!(e.items[0].kind, BindErrorKind::UndefinedMacro);
        assert_eq!(e.items[0].identifier, "ON");
    }
}
