// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for the synchronous RTL subset.

use crate::syntax::expr::{parse_expr, RTL_DIALECT};
use crate::syntax::lexer::{describe, tokenize, Tok, TokenStream};
use crate::syntax::{DiagCode, Diagnostic, Diagnostics, Expr, Span};

use super::ast::*;

const ITEM_KEYWORDS: &[&str] = &[
    "assign",
    "always",
    "always_ff",
    "always_comb",
    "wire",
    "reg",
    "logic",
    "input",
    "output",
    "parameter",
    "localparam",
    "endmodule",
    "module",
];

const UNSUPPORTED_ITEMS: &[&str] = &[
    "generate",
    "initial",
    "function",
    "task",
    "integer",
    "genvar",
    "for",
    "inout",
    "always_latch",
    "real",
    "specify",
];

pub fn parse_source(src: &str) -> Result<SourceFile, Diagnostics> {
    let toks = tokenize(src).map_err(Diagnostics::from)?;
    let mut p = Parser {
        ts: TokenStream::new(toks),
        diags: Diagnostics::new(),
        next_stmt: 1,
    };
    let file = p.source();
    if p.diags.has_errors() {
        Err(p.diags)
    } else {
        Ok(file)
    }
}

struct Parser {
    ts: TokenStream,
    diags: Diagnostics,
    next_stmt: u32,
}

type PResult<T> = Result<T, Diagnostic>;

fn unsupported(span: Span, what: &str) -> Diagnostic {
    Diagnostic::error(
        DiagCode::Unsupported,
        span.line,
        span.col,
        format!("unsupported construct: {what}"),
    )
}

impl Parser {
    fn stmt_id(&mut self) -> StmtId {
        let id = StmtId(self.next_stmt);
        self.next_stmt += 1;
        id
    }

    fn expr(&mut self) -> PResult<Expr> {
        parse_expr(&mut self.ts, RTL_DIALECT)
    }

    fn source(&mut self) -> SourceFile {
        let mut file = SourceFile::default();
        while !self.ts.at_eof() {
            if self.ts.is_keyword("module") {
                match self.module() {
                    Ok(m) => file.modules.push(m),
                    Err(d) => {
                        self.diags.push(d);
                        self.skip_past("endmodule");
                    }
                }
            } else {
                let span = self.ts.span();
                let d = match self.ts.peek() {
                    Tok::Ident(k) if UNSUPPORTED_ITEMS.contains(&k.as_str()) => unsupported(span, k),
                    other => self.ts.error_here(format!("expected 'module', found {}", describe(other))),
                };
                self.diags.push(d);
                self.skip_past("endmodule");
            }
        }
        file
    }

    fn skip_past(&mut self, kw: &str) {
        while !self.ts.at_eof() {
            if self.ts.eat_keyword(kw) {
                return;
            }
            self.ts.next();
        }
    }

    /// Skip to the next module item after an error.
    fn resync_item(&mut self) {
        // always consume at least one token to guarantee progress
        self.ts.next();
        while !self.ts.at_eof() {
            if self.ts.eat_punct(";") {
                return;
            }
            if let Tok::Ident(k) = self.ts.peek() {
                if ITEM_KEYWORDS.contains(&k.as_str()) {
                    return;
                }
            }
            self.ts.next();
        }
    }

    fn module(&mut self) -> PResult<Module> {
        self.ts.expect_keyword("module")?;
        let (name, span) = self.ts.expect_ident()?;
        let mut m = Module {
            name,
            span,
            params: Vec::new(),
            ports: Vec::new(),
            nets: Vec::new(),
            items: Vec::new(),
        };
        if self.ts.eat_punct("#") {
            self.ts.expect_punct("(")?;
            loop {
                let local = if self.ts.eat_keyword("localparam") {
                    true
                } else {
                    self.ts.eat_keyword("parameter");
                    false
                };
                let p = self.param_assignment(local)?;
                m.params.push(p);
                if !self.ts.eat_punct(",") {
                    break;
                }
            }
            self.ts.expect_punct(")")?;
        }
        if self.ts.eat_punct("(") {
            if !self.ts.is_punct(")") {
                self.port_list(&mut m)?;
            }
            self.ts.expect_punct(")")?;
        }
        self.ts.expect_punct(";")?;

        loop {
            if self.ts.at_eof() {
                return Err(self.ts.error_here("missing 'endmodule'"));
            }
            if self.ts.eat_keyword("endmodule") {
                break;
            }
            if let Err(d) = self.item(&mut m) {
                let generate = d.code == DiagCode::Unsupported && d.message.ends_with("generate");
                self.diags.push(d);
                if generate {
                    self.skip_past("endgenerate");
                } else {
                    self.resync_item();
                }
            }
        }
        Ok(m)
    }

    fn param_assignment(&mut self, local: bool) -> PResult<ParamDecl> {
        if self.ts.is_punct("[") {
            // a declared parameter range is accepted and ignored
            self.range()?;
        }
        let (name, span) = self.ts.expect_ident()?;
        self.ts.expect_punct("=")?;
        let value = self.expr()?;
        Ok(ParamDecl {
            name,
            value,
            local,
            span,
        })
    }

    fn range(&mut self) -> PResult<Range> {
        self.ts.expect_punct("[")?;
        let msb = self.expr()?;
        self.ts.expect_punct(":")?;
        let lsb = self.expr()?;
        self.ts.expect_punct("]")?;
        Ok(Range { msb, lsb })
    }

    fn opt_range(&mut self) -> PResult<Option<Range>> {
        if self.ts.is_punct("[") {
            Ok(Some(self.range()?))
        } else {
            Ok(None)
        }
    }

    fn direction(&mut self) -> PResult<Option<Direction>> {
        let span = self.ts.span();
        if self.ts.eat_keyword("input") {
            Ok(Some(Direction::Input))
        } else if self.ts.eat_keyword("output") {
            Ok(Some(Direction::Output))
        } else if self.ts.is_keyword("inout") {
            Err(unsupported(span, "inout"))
        } else {
            Ok(None)
        }
    }

    fn port_list(&mut self, m: &mut Module) -> PResult<()> {
        let mut current: Option<(Direction, bool, Option<Range>)> = None;
        loop {
            if let Some(dir) = self.direction()? {
                let is_reg = self.ts.eat_keyword("reg") || self.ts.eat_keyword("logic");
                if !is_reg {
                    self.ts.eat_keyword("wire");
                }
                current = Some((dir, is_reg, self.opt_range()?));
            }
            let (name, span) = self.ts.expect_ident()?;
            match &current {
                Some((dir, is_reg, range)) => m.ports.push(PortDecl {
                    name,
                    dir: *dir,
                    is_reg: *is_reg,
                    range: range.clone(),
                    span,
                }),
                // non-ANSI: direction declared in the body
                None => m.ports.push(PortDecl {
                    name,
                    dir: Direction::Input,
                    is_reg: false,
                    range: None,
                    span: Span { line: 0, col: 0 },
                }),
            }
            if !self.ts.eat_punct(",") {
                return Ok(());
            }
        }
    }

    fn item(&mut self, m: &mut Module) -> PResult<()> {
        let span = self.ts.span();
        let kw = match self.ts.peek() {
            Tok::Ident(k) => k.clone(),
            other => return Err(self.ts.error_here(format!("expected module item, found {}", describe(other)))),
        };
        if UNSUPPORTED_ITEMS.contains(&kw.as_str()) {
            return Err(unsupported(span, &kw));
        }
        match kw.as_str() {
            "parameter" | "localparam" => {
                self.ts.next();
                loop {
                    let p = self.param_assignment(kw == "localparam")?;
                    m.params.push(p);
                    if !self.ts.eat_punct(",") {
                        break;
                    }
                }
                self.ts.expect_punct(";")?;
            }
            "input" | "output" => self.port_decl(m)?,
            "wire" | "reg" | "logic" => self.net_decl(m)?,
            "assign" => {
                self.ts.next();
                loop {
                    let (lhs, lspan) = self.lvalue()?;
                    self.ts.expect_punct("=")?;
                    let id = self.stmt_id();
                    let rhs = self.expr()?;
                    m.items.push(Item::Assign(ContAssign {
                        lhs,
                        rhs,
                        id,
                        span: lspan,
                    }));
                    if !self.ts.eat_punct(",") {
                        break;
                    }
                }
                self.ts.expect_punct(";")?;
            }
            "always" | "always_ff" | "always_comb" => {
                self.ts.next();
                let kind = if kw == "always_comb" {
                    AlwaysKind::Comb
                } else {
                    self.sensitivity()?
                };
                let body = self.stmt()?;
                m.items.push(Item::Always(AlwaysBlock { kind, body, span }));
            }
            _ => self.instance(m)?,
        }
        Ok(())
    }

    fn port_decl(&mut self, m: &mut Module) -> PResult<()> {
        let dir = self.direction()?.expect("caller checked keyword");
        let is_reg = self.ts.eat_keyword("reg") || self.ts.eat_keyword("logic");
        if !is_reg {
            self.ts.eat_keyword("wire");
        }
        let range = self.opt_range()?;
        loop {
            let (name, span) = self.ts.expect_ident()?;
            match m.ports.iter_mut().find(|p| p.name == name) {
                Some(p) if p.span.line == 0 => {
                    p.dir = dir;
                    p.is_reg = is_reg;
                    p.range = range.clone();
                    p.span = span;
                }
                Some(_) => {
                    return Err(Diagnostic::error(
                        DiagCode::Duplicate,
                        span.line,
                        span.col,
                        format!("port '{name}' declared twice"),
                    ))
                }
                None => {
                    return Err(Diagnostic::error(
                        DiagCode::Syntax,
                        span.line,
                        span.col,
                        format!("'{name}' is not in the port list"),
                    ))
                }
            }
            if !self.ts.eat_punct(",") {
                break;
            }
        }
        self.ts.expect_punct(";")
            .map(|_| ())
    }

    fn net_decl(&mut self, m: &mut Module) -> PResult<()> {
        let kind = if self.ts.eat_keyword("wire") {
            NetKind::Wire
        } else {
            self.ts.next();
            NetKind::Reg
        };
        let range = self.opt_range()?;
        loop {
            let (name, span) = self.ts.expect_ident()?;
            if self.ts.is_punct("[") {
                return Err(unsupported(self.ts.span(), "memory array"));
            }
            if let Some(p) = m.ports.iter_mut().find(|p| p.name == name) {
                // `output q; reg q;` style
                if kind == NetKind::Reg {
                    p.is_reg = true;
                }
                if p.range.is_none() {
                    p.range = range.clone();
                }
            } else if m.nets.iter().any(|n| n.name == name) {
                return Err(Diagnostic::error(
                    DiagCode::Duplicate,
                    span.line,
                    span.col,
                    format!("'{name}' declared twice"),
                ));
            } else {
                m.nets.push(NetDecl {
                    name: name.clone(),
                    kind,
                    range: range.clone(),
                    span,
                });
            }
            if self.ts.eat_punct("=") {
                if kind == NetKind::Reg {
                    return Err(unsupported(span, "register initializer"));
                }
                let id = self.stmt_id();
                let rhs = self.expr()?;
                m.items.push(Item::Assign(ContAssign {
                    lhs: name,
                    rhs,
                    id,
                    span,
                }));
            }
            if !self.ts.eat_punct(",") {
                break;
            }
        }
        self.ts.expect_punct(";").map(|_| ())
    }

    fn sensitivity(&mut self) -> PResult<AlwaysKind> {
        self.ts.expect_punct("@")?;
        if self.ts.eat_punct("*") {
            return Ok(AlwaysKind::Comb);
        }
        self.ts.expect_punct("(")?;
        if self.ts.eat_punct("*") {
            self.ts.expect_punct(")")?;
            return Ok(AlwaysKind::Comb);
        }
        let span = self.ts.span();
        if self.ts.is_keyword("negedge") {
            return Err(unsupported(span, "negedge clocking"));
        }
        if !self.ts.eat_keyword("posedge") {
            return Err(unsupported(span, "explicit sensitivity list"));
        }
        let (clock, _) = self.ts.expect_ident()?;
        if self.ts.is_keyword("or") || self.ts.is_punct(",") {
            return Err(unsupported(self.ts.span(), "asynchronous reset"));
        }
        self.ts.expect_punct(")")?;
        Ok(AlwaysKind::Clocked { clock })
    }

    fn lvalue(&mut self) -> PResult<(String, Span)> {
        let span = self.ts.span();
        if self.ts.is_punct("{") {
            return Err(unsupported(span, "concatenation on the left-hand side"));
        }
        let (name, span) = self.ts.expect_ident()?;
        if self.ts.is_punct("[") {
            return Err(unsupported(span, "part-select on the left-hand side"));
        }
        Ok((name, span))
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.ts.span();
        if self.ts.eat_punct(";") {
            return Ok(Stmt::Null);
        }
        if self.ts.eat_keyword("begin") {
            if self.ts.eat_punct(":") {
                self.ts.expect_ident()?;
            }
            let mut items = Vec::new();
            while !self.ts.eat_keyword("end") {
                if self.ts.at_eof() {
                    return Err(self.ts.error_here("missing 'end'"));
                }
                items.push(self.stmt()?);
            }
            if self.ts.eat_punct(":") {
                self.ts.expect_ident()?;
            }
            return Ok(Stmt::Block(items));
        }
        if self.ts.eat_keyword("if") {
            self.ts.expect_punct("(")?;
            let cond = self.expr()?;
            self.ts.expect_punct(")")?;
            let then_arm = self.stmt_id();
            let then = Box::new(self.stmt()?);
            let els = if self.ts.eat_keyword("else") {
                let id = self.stmt_id();
                Some((id, Box::new(self.stmt()?)))
            } else {
                None
            };
            return Ok(Stmt::If {
                cond,
                then,
                then_arm,
                els,
                span,
            });
        }
        if self.ts.is_keyword("casez") || self.ts.is_keyword("casex") {
            return Err(unsupported(span, "casez/casex"));
        }
        if self.ts.eat_keyword("case") {
            self.ts.expect_punct("(")?;
            let subject = self.expr()?;
            self.ts.expect_punct(")")?;
            let mut arms = Vec::new();
            let mut seen_default = false;
            while !self.ts.eat_keyword("endcase") {
                if self.ts.at_eof() {
                    return Err(self.ts.error_here("missing 'endcase'"));
                }
                let arm_span = self.ts.span();
                let labels = if self.ts.eat_keyword("default") {
                    if seen_default {
                        return Err(Diagnostic::error(
                            DiagCode::Duplicate,
                            arm_span.line,
                            arm_span.col,
                            "second default arm",
                        ));
                    }
                    seen_default = true;
                    self.ts.eat_punct(":");
                    Vec::new()
                } else {
                    let mut labels = vec![self.expr()?];
                    while self.ts.eat_punct(",") {
                        labels.push(self.expr()?);
                    }
                    self.ts.expect_punct(":")?;
                    labels
                };
                let id = self.stmt_id();
                let body = self.stmt()?;
                arms.push(CaseArm {
                    labels,
                    body,
                    id,
                    span: arm_span,
                });
            }
            return Ok(Stmt::Case {
                subject,
                arms,
                span,
            });
        }
        if let Tok::Ident(k) = self.ts.peek() {
            if matches!(k.as_str(), "for" | "while" | "repeat" | "forever" | "fork") {
                return Err(unsupported(span, k));
            }
        }
        let (lhs, span) = self.lvalue()?;
        let blocking = if self.ts.eat_punct("=") {
            true
        } else if self.ts.eat_punct("<=") {
            false
        } else {
            return Err(self
                .ts
                .error_here(format!("expected '=' or '<=', found {}", describe(self.ts.peek()))));
        };
        let id = self.stmt_id();
        let rhs = self.expr()?;
        self.ts.expect_punct(";")?;
        Ok(Stmt::Assign {
            lhs,
            rhs,
            blocking,
            id,
            span,
        })
    }

    fn instance(&mut self, m: &mut Module) -> PResult<()> {
        let (module, span) = self.ts.expect_ident()?;
        let mut params = Vec::new();
        if self.ts.eat_punct("#") {
            self.ts.expect_punct("(")?;
            loop {
                if !self.ts.eat_punct(".") {
                    return Err(unsupported(self.ts.span(), "positional parameter override"));
                }
                let (name, _) = self.ts.expect_ident()?;
                self.ts.expect_punct("(")?;
                let v = self.expr()?;
                self.ts.expect_punct(")")?;
                params.push((name, v));
                if !self.ts.eat_punct(",") {
                    break;
                }
            }
            self.ts.expect_punct(")")?;
        }
        let (name, _) = self.ts.expect_ident()?;
        self.ts.expect_punct("(")?;
        let mut conns = Vec::new();
        if !self.ts.is_punct(")") {
            loop {
                if !self.ts.eat_punct(".") {
                    return Err(unsupported(self.ts.span(), "positional port connection"));
                }
                let (port, _) = self.ts.expect_ident()?;
                self.ts.expect_punct("(")?;
                let e = if self.ts.is_punct(")") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.ts.expect_punct(")")?;
                conns.push((port, e));
                if !self.ts.eat_punct(",") {
                    break;
                }
            }
        }
        self.ts.expect_punct(")")?;
        self.ts.expect_punct(";")?;
        m.items.push(Item::Instance(Instance {
            module,
            name,
            params,
            conns,
            span,
        }));
        Ok(())
    }
}
