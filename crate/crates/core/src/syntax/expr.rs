// SPDX-License-Identifier: Apache-2.0

//! Expression trees shared by RTL and assertion sources.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::diag::{DiagCode, Diagnostic};
use super::lexer::{describe, Span, Tok, TokenStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    /// `~`
    Not,
    /// `!`
    LogNot,
    /// `-`
    Neg,
    /// reduction `&`
    RedAnd,
    /// reduction `|`
    RedOr,
    /// reduction `^`
    RedXor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    And,
    Or,
    Xor,
    Add,
    Sub,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
            BinaryOp::Xor => "^",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::LogOr => 2,
            BinaryOp::LogAnd => 3,
            BinaryOp::Or => 4,
            BinaryOp::Xor => 5,
            BinaryOp::And => 6,
            BinaryOp::Eq | BinaryOp::Ne => 7,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 8,
            BinaryOp::Shl | BinaryOp::Shr => 9,
            BinaryOp::Add | BinaryOp::Sub => 10,
        }
    }

    fn from_punct(p: &str) -> Option<BinaryOp> {
        Some(match p {
            "&" => BinaryOp::And,
            "|" => BinaryOp::Or,
            "^" => BinaryOp::Xor,
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "<<" => BinaryOp::Shl,
            ">>" => BinaryOp::Shr,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "&&" => BinaryOp::LogAnd,
            "||" => BinaryOp::LogOr,
            _ => return None,
        })
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }
}

/// Sampled-value functions usable in assertions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SysFunc {
    Past,
    Rose,
    Fell,
    Stable,
}

impl SysFunc {
    pub fn name(self) -> &'static str {
        match self {
            SysFunc::Past => "past",
            SysFunc::Rose => "rose",
            SysFunc::Fell => "fell",
            SysFunc::Stable => "stable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    /// Possibly dotted reference, `a` or `top.u0.a`.
    Ident { path: Vec<String>, span: Span },
    Number { value: u64, width: Option<u32> },
    Macro { name: String, span: Span },
    Unary { op: UnaryOp, arg: Box<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Ternary { cond: Box<Expr>, then: Box<Expr>, els: Box<Expr> },
    Concat(Vec<Expr>),
    /// Constant bit or part select `base[msb]` / `base[msb:lsb]`.
    Select { base: Box<Expr>, msb: Box<Expr>, lsb: Option<Box<Expr>> },
    Call { func: SysFunc, args: Vec<Expr>, span: Span },
}

impl Expr {
    pub fn ident(name: &str) -> Expr {
        Expr::Ident {
            path: name.split('.').map(str::to_string).collect(),
            span: Span::default(),
        }
    }

    pub fn num(value: u64) -> Expr {
        Expr::Number { value, width: None }
    }

    pub fn sized(value: u64, width: u32) -> Expr {
        Expr::Number {
            value,
            width: Some(width),
        }
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Expr {
        Expr::Unary {
            op,
            arg: Box::new(arg),
        }
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Span of the first identifier-like leaf, if any.
    pub fn span(&self) -> Option<Span> {
        let mut found = None;
        self.walk(&mut |e| {
            if found.is_none() {
                match e {
                    Expr::Ident { span, .. } | Expr::Macro { span, .. } | Expr::Call { span, .. } => {
                        found = Some(*span)
                    }
                    _ => {}
                }
            }
        });
        found
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Ident { .. } | Expr::Number { .. } | Expr::Macro { .. } => {}
            Expr::Unary { arg, .. } => arg.walk(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Ternary { cond, then, els } => {
                cond.walk(f);
                then.walk(f);
                els.walk(f);
            }
            Expr::Concat(items) => items.iter().for_each(|e| e.walk(f)),
            Expr::Select { base, msb, lsb } => {
                base.walk(f);
                msb.walk(f);
                if let Some(l) = lsb {
                    l.walk(f);
                }
            }
            Expr::Call { args, .. } => args.iter().for_each(|e| e.walk(f)),
        }
    }

    /// Bottom-up rewrite; `f` sees each node after its children were rewritten.
    pub fn rewrite(self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let e = match self {
            Expr::Unary { op, arg } => Expr::Unary {
                op,
                arg: Box::new(arg.rewrite(f)),
            },
            Expr::Binary { op, lhs, rhs } => Expr::Binary {
                op,
                lhs: Box::new(lhs.rewrite(f)),
                rhs: Box::new(rhs.rewrite(f)),
            },
            Expr::Ternary { cond, then, els } => Expr::Ternary {
                cond: Box::new(cond.rewrite(f)),
                then: Box::new(then.rewrite(f)),
                els: Box::new(els.rewrite(f)),
            },
            Expr::Concat(items) => Expr::Concat(items.into_iter().map(|e| e.rewrite(f)).collect()),
            Expr::Select { base, msb, lsb } => Expr::Select {
                base: Box::new(base.rewrite(f)),
                msb: Box::new(msb.rewrite(f)),
                lsb: lsb.map(|l| Box::new(l.rewrite(f))),
            },
            Expr::Call { func, args, span } => Expr::Call {
                func,
                args: args.into_iter().map(|e| e.rewrite(f)).collect(),
                span,
            },
            leaf => leaf,
        };
        f(e)
    }

    /// Dotted identifier references in source order (duplicates kept).
    pub fn idents(&self) -> Vec<(String, Span)> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Ident { path, span } = e {
                out.push((path.join("."), *span));
            }
        });
        out
    }

    pub fn macros(&self) -> Vec<(String, Span)> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Macro { name, span } = e {
                out.push((name.clone(), *span));
            }
        });
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Ternary { .. } => 1,
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Unary { .. } => 11,
            _ => 12,
        }
    }
}

fn fmt_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Ident { path, .. } => f.write_str(&path.join(".")),
            Expr::Number { value, width: None } => write!(f, "{value}"),
            Expr::Number {
                value,
                width: Some(1),
            } => write!(f, "1'b{value}"),
            Expr::Number {
                value,
                width: Some(w),
            } => write!(f, "{w}'d{value}"),
            Expr::Macro { name, .. } => write!(f, "`{name}"),
            Expr::Unary { op, arg } => {
                let sym = match op {
                    UnaryOp::Not => "~",
                    UnaryOp::LogNot => "!",
                    UnaryOp::Neg => "-",
                    UnaryOp::RedAnd => "&",
                    UnaryOp::RedOr => "|",
                    UnaryOp::RedXor => "^",
                };
                f.write_str(sym)?;
                // parenthesize nested unaries so `- -a` and `&&a` never appear
                if matches!(**arg, Expr::Unary { .. }) {
                    write!(f, "({arg})")
                } else {
                    fmt_child(f, arg, 12)
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                fmt_child(f, lhs, p)?;
                write!(f, " {} ", op.symbol())?;
                fmt_child(f, rhs, p + 1)
            }
            Expr::Ternary { cond, then, els } => {
                fmt_child(f, cond, 2)?;
                f.write_str(" ? ")?;
                fmt_child(f, then, 2)?;
                f.write_str(" : ")?;
                fmt_child(f, els, 1)
            }
            Expr::Concat(items) => {
                f.write_str("{")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str("}")
            }
            Expr::Select { base, msb, lsb } => {
                fmt_child(f, base, 12)?;
                match lsb {
                    Some(l) => write!(f, "[{msb}:{l}]"),
                    None => write!(f, "[{msb}]"),
                }
            }
            Expr::Call { func, args, .. } => {
                write!(f, "${}(", func.name())?;
                for (i, e) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Which leaf forms a given source language admits.
#[derive(Debug, Clone, Copy)]
pub struct ExprDialect {
    pub hierarchical_names: bool,
    pub macros: bool,
    pub sampled_functions: bool,
}

pub const RTL_DIALECT: ExprDialect = ExprDialect {
    hierarchical_names: false,
    macros: false,
    sampled_functions: false,
};

pub const SVA_DIALECT: ExprDialect = ExprDialect {
    hierarchical_names: true,
    macros: true,
    sampled_functions: true,
};

pub fn parse_expr(ts: &mut TokenStream, dialect: ExprDialect) -> Result<Expr, Diagnostic> {
    ExprParser { ts, dialect }.ternary()
}

struct ExprParser<'a> {
    ts: &'a mut TokenStream,
    dialect: ExprDialect,
}

impl ExprParser<'_> {
    fn ternary(&mut self) -> Result<Expr, Diagnostic> {
        let cond = self.binary(2)?;
        if self.ts.eat_punct("?") {
            let then = self.ternary()?;
            self.ts.expect_punct(":")?;
            let els = self.ternary()?;
            Ok(Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                els: Box::new(els),
            })
        } else {
            Ok(cond)
        }
    }

    fn peek_binop(&self) -> Option<BinaryOp> {
        match self.ts.peek() {
            Tok::Punct(p) => BinaryOp::from_punct(p),
            _ => None,
        }
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, Diagnostic> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.ts.next();
            let rhs = self.binary(p + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, Diagnostic> {
        let op = match self.ts.peek() {
            Tok::Punct("~") => Some(UnaryOp::Not),
            Tok::Punct("!") => Some(UnaryOp::LogNot),
            Tok::Punct("-") => Some(UnaryOp::Neg),
            Tok::Punct("&") => Some(UnaryOp::RedAnd),
            Tok::Punct("|") => Some(UnaryOp::RedOr),
            Tok::Punct("^") => Some(UnaryOp::RedXor),
            Tok::Punct(p @ ("~&" | "~|" | "~^")) => {
                let s = self.ts.span();
                return Err(Diagnostic::error(
                    DiagCode::Unsupported,
                    s.line,
                    s.col,
                    format!("operator '{p}' is not supported"),
                ));
            }
            _ => None,
        };
        if let Some(op) = op {
            self.ts.next();
            let arg = self.unary()?;
            return Ok(Expr::unary(op, arg));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, Diagnostic> {
        let mut e = self.primary()?;
        while self.ts.is_punct("[") {
            self.ts.next();
            let msb = self.ternary()?;
            let lsb = if self.ts.eat_punct(":") {
                Some(Box::new(self.ternary()?))
            } else {
                None
            };
            self.ts.expect_punct("]")?;
            e = Expr::Select {
                base: Box::new(e),
                msb: Box::new(msb),
                lsb,
            };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.ts.span();
        match self.ts.peek().clone() {
            Tok::Number { value, width } => {
                self.ts.next();
                Ok(Expr::Number { value, width })
            }
            Tok::Ident(name) => {
                self.ts.next();
                let mut path = vec![name];
                while self.ts.is_punct(".") {
                    if !self.dialect.hierarchical_names {
                        return Err(Diagnostic::error(
                            DiagCode::Unsupported,
                            span.line,
                            span.col,
                            "hierarchical reference is not supported in RTL",
                        ));
                    }
                    self.ts.next();
                    path.push(self.ts.expect_ident()?.0);
                }
                Ok(Expr::Ident { path, span })
            }
            Tok::MacroRef(name) => {
                if !self.dialect.macros {
                    return Err(Diagnostic::error(
                        DiagCode::Unsupported,
                        span.line,
                        span.col,
                        "macro reference",
                    ));
                }
                self.ts.next();
                Ok(Expr::Macro { name, span })
            }
            Tok::SysIdent(name) => {
                let func = match name.as_str() {
                    "past" => SysFunc::Past,
                    "rose" => SysFunc::Rose,
                    "fell" => SysFunc::Fell,
                    "stable" => SysFunc::Stable,
                    _ => None.ok_or_else(|| {
                        Diagnostic::error(
                            DiagCode::Unsupported,
                            span.line,
                            span.col,
                            format!("system function ${name}"),
                        )
                    })?,
                };
                if !self.dialect.sampled_functions {
                    return Err(Diagnostic::error(
                        DiagCode::Unsupported,
                        span.line,
                        span.col,
                        format!("system function ${name}"),
                    ));
                }
                self.ts.next();
                self.ts.expect_punct("(")?;
                let mut args = vec![self.ternary()?];
                while self.ts.eat_punct(",") {
                    args.push(self.ternary()?);
                }
                self.ts.expect_punct(")")?;
                let max_args = if func == SysFunc::Past { 2 } else { 1 };
                if args.len() > max_args {
                    return Err(Diagnostic::error(
                        DiagCode::Syntax,
                        span.line,
                        span.col,
                        format!("${name} takes at most {max_args} argument(s)"),
                    ));
                }
                Ok(Expr::Call { func, args, span })
            }
            Tok::Punct("(") => {
                self.ts.next();
                let e = self.ternary()?;
                self.ts.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.ts.next();
                let mut items = vec![self.ternary()?];
                while self.ts.eat_punct(",") {
                    items.push(self.ternary()?);
                }
                if self.ts.is_punct("{") {
                    return Err(self.ts.error_here("replication is not supported"));
                }
                self.ts.expect_punct("}")?;
                Ok(Expr::Concat(items))
            }
            other => Err(self
                .ts
                .error_here(format!("expected expression, found {}", describe(&other)))),
        }
    }
}

/// Minimal number of bits to hold `v` (at least 1).
pub fn min_width(v: u64) -> u32 {
    (64 - v.leading_zeros()).max(1)
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}
