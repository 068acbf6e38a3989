// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use crate::syntax::expr::{parse_expr, SVA_DIALECT};
use crate::syntax::lexer::{describe, tokenize, Tok, TokenStream};
use crate::syntax::{DiagCode, Diagnostic, Diagnostics, Expr, Span};

use super::ast::{label_to_id, Delay, Implication, MacroDef, PropAst, PropKind, PropertyDecl, PropertyFile, SeqElem, Sequence};

pub const DEFAULT_MAX_DELAY: u32 = 32;

/// A statement that failed to parse, kept verbatim for repair.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenProperty {
    pub prop_id: String,
    pub kind: Option<PropKind>,
    pub lines: (u32, u32),
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct LenientParse {
    pub file: PropertyFile,
    pub diagnostics: Diagnostics,
    pub broken: Vec<BrokenProperty>,
}

pub fn parse_properties(src: &str) -> Result<PropertyFile, Diagnostics> {
    parse_properties_with(src, DEFAULT_MAX_DELAY)
}

pub fn parse_properties_with(src: &str, max_delay: u32) -> Result<PropertyFile, Diagnostics> {
    let out = parse_lenient_with(src, max_delay);
    if out.diagnostics.has_errors() {
        Err(out.diagnostics)
    } else {
        Ok(out.file)
    }
}

/// Parse what can be parsed. Statements with syntax errors are returned in
/// `broken`; properties that only reference undefined macros are kept.
pub fn parse_lenient(src: &str) -> LenientParse {
    parse_lenient_with(src, DEFAULT_MAX_DELAY)
}

pub fn parse_lenient_with(src: &str, max_delay: u32) -> LenientParse {
    let mut out = LenientParse::default();
    let toks = lex_tolerant(src, &mut out.diagnostics);
    let mut p = Parser {
        ts: TokenStream::new(toks),
        src: SourceText::new(src),
        max_delay,
        out,
        defined: BTreeSet::new(),
        unclocked: Vec::new(),
    };
    p.file();
    p.finish()
}

/// Tokenize, replacing each unlexable character with a stray `#` so that
/// the surrounding statement fails to parse while the rest of the file
/// stays usable.
fn lex_tolerant(src: &str, diags: &mut Diagnostics) -> Vec<crate::syntax::lexer::Token> {
    let mut text: Vec<String> = src.lines().map(str::to_string).collect();
    loop {
        match tokenize(&text.join("\n")) {
            Ok(t) => return t,
            Err(d) => {
                let line = d.line.max(1) as usize - 1;
                let col = d.column.max(1) as usize - 1;
                diags.push(d);
                let Some(l) = text.get_mut(line) else { return tokenize("").unwrap() };
                let mut chars: Vec<char> = l.chars().collect();
                if col < chars.len() && chars[col] != '#' {
                    chars[col] = '#';
                } else {
                    // nothing left to patch on this line
                    chars.clear();
                }
                *l = chars.into_iter().collect();
            }
        }
    }
}

struct SourceText {
    lines: Vec<Vec<char>>,
}

impl SourceText {
    fn new(src: &str) -> Self {
        SourceText {
            lines: src.lines().map(|l| l.chars().collect()).collect(),
        }
    }

    /// Text from `a` up to and including the character at `b`.
    fn slice(&self, a: Span, b: Span) -> String {
        let mut out = String::new();
        for line in a.line..=b.line {
            let Some(chars) = self.lines.get(line as usize - 1) else { break };
            let from = if line == a.line { a.col as usize - 1 } else { 0 };
            let to = if line == b.line { (b.col as usize).min(chars.len()) } else { chars.len() };
            if line > a.line {
                out.push('\n');
            }
            if from < to {
                out.extend(&chars[from..to]);
            }
        }
        out
    }
}

struct Parser {
    ts: TokenStream,
    src: SourceText,
    max_delay: u32,
    out: LenientParse,
    defined: BTreeSet<String>,
    /// Properties without an explicit clock: (prop_id, line).
    unclocked: Vec<(String, u32)>,
}

type PResult<T> = Result<T, Diagnostic>;

fn err_at(code: DiagCode, s: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(code, s.line, s.col, msg)
}

impl Parser {
    fn file(&mut self) {
        while !self.ts.at_eof() {
            let start = self.ts.span();
            match self.ts.peek().clone() {
                Tok::Define { name, body } => {
                    self.ts.next();
                    self.define(name, body, start);
                }
                Tok::Ident(kw) if kw == "default" => {
                    if let Err(d) = self.default_clocking() {
                        self.out.diagnostics.push(d);
                        self.skip_statement();
                    }
                }
                Tok::Ident(kw) if kw == "endclocking" => {
                    self.ts.next();
                }
                Tok::Ident(_) => self.property_statement(),
                other => {
                    self.out
                        .diagnostics
                        .push(err_at(DiagCode::Syntax, start, format!("unexpected {}", describe(&other))));
                    self.skip_statement();
                }
            }
        }
    }

    fn finish(mut self) -> LenientParse {
        if self.out.file.clocking.is_none() {
            for (id, line) in std::mem::take(&mut self.unclocked) {
                self.out.diagnostics.push(
                    Diagnostic::error(DiagCode::Clocking, line, 1, "property has no clock and the file has no default clocking")
                        .with_prop(id),
                );
            }
        }
        self.out
    }

    fn skip_statement(&mut self) {
        loop {
            match self.ts.peek() {
                Tok::Eof | Tok::Define { .. } => return,
                Tok::Punct(";") => {
                    self.ts.next();
                    return;
                }
                _ => {
                    self.ts.next();
                }
            }
        }
    }

    fn define(&mut self, name: String, body: String, at: Span) {
        let body = body.trim().to_string();
        if self.out.file.macros.iter().any(|m| m.name == name) {
            self.out
                .diagnostics
                .push(err_at(DiagCode::Duplicate, at, format!("macro '{name}' defined twice")));
            return;
        }
        match parse_macro_body(&body) {
            Ok(e) => {
                if let Some((inner, _)) = e.macros().first() {
                    self.out.diagnostics.push(err_at(
                        DiagCode::RecursiveMacro,
                        at,
                        format!("macro '{name}' refers to macro '{inner}'; only one level of expansion is allowed"),
                    ));
                    return;
                }
            }
            Err(mut d) => {
                d.line = at.line;
                d.column = at.col;
                d.message = format!("in body of macro '{name}': {}", d.message);
                self.out.diagnostics.push(d);
                return;
            }
        }
        self.defined.insert(name.clone());
        self.out.file.macros.push(MacroDef { name, body });
    }

    fn default_clocking(&mut self) -> PResult<()> {
        let at = self.ts.span();
        self.ts.expect_keyword("default")?;
        self.ts.expect_keyword("clocking")?;
        if matches!(self.ts.peek(), Tok::Ident(_)) {
            self.ts.next();
        }
        let clock = self.clock_event()?;
        self.ts.expect_punct(";")?;
        self.ts.expect_keyword("endclocking")?;
        if self.out.file.clocking.is_some() {
            return Err(err_at(DiagCode::Duplicate, at, "default clocking declared twice"));
        }
        self.out.file.clocking = Some(clock);
        Ok(())
    }

    /// `@(posedge name)`
    fn clock_event(&mut self) -> PResult<String> {
        self.ts.expect_punct("@")?;
        self.ts.expect_punct("(")?;
        if self.ts.is_keyword("negedge") {
            return Err(err_at(DiagCode::Unsupported, self.ts.span(), "only posedge clocking is supported"));
        }
        self.ts.expect_keyword("posedge")?;
        let (mut name, _) = self.ts.expect_ident()?;
        while self.ts.eat_punct(".") {
            let (part, _) = self.ts.expect_ident()?;
            name = format!("{name}.{part}");
        }
        self.ts.expect_punct(")")?;
        Ok(name)
    }

    fn property_statement(&mut self) {
        let start = self.ts.span();
        let mut prop_id = format!("ANON-{}", start.line);
        let mut kind = None;
        let res = (|| -> PResult<(PropKind, PropAst)> {
            if matches!(self.ts.peek_at(1), Tok::Punct(":")) {
                let (label, _) = self.ts.expect_ident()?;
                prop_id = label_to_id(&label);
                self.ts.next();
            }
            let k = match self.ts.peek() {
                Tok::Ident(s) if s == "assert" => PropKind::Assertion,
                Tok::Ident(s) if s == "assume" => PropKind::Assumption,
                Tok::Ident(s) if s == "cover" => PropKind::Cover,
                other => {
                    return Err(self
                        .ts
                        .error_here(format!("expected assert, assume or cover, found {}", describe(other))))
                }
            };
            kind = Some(k);
            self.ts.next();
            self.ts.expect_keyword("property")?;
            self.ts.expect_punct("(")?;
            let ast = self.property_body()?;
            self.ts.expect_punct(")")?;
            if !self.ts.is_punct(";") {
                return Err(self.ts.error_here(format!("expected ';', found {}", describe(self.ts.peek()))));
            }
            Ok((k, ast))
        })();
        match res {
            Ok((kind, ast)) => {
                let end = self.ts.span();
                self.ts.next();
                let text = self.src.slice(start, end);
                if self.out.file.properties.iter().any(|p| p.prop_id == prop_id) {
                    self.out.diagnostics.push(
                        err_at(DiagCode::Duplicate, start, format!("property '{prop_id}' declared twice"))
                            .with_prop(prop_id),
                    );
                    return;
                }
                for e in ast.exprs() {
                    for (m, s) in e.macros() {
                        if !self.defined.contains(&m) {
                            self.out.diagnostics.push(
                                err_at(DiagCode::UndefinedMacro, s, format!("macro '{m}' used before definition"))
                                    .with_prop(prop_id.clone()),
                            );
                        }
                    }
                }
                if ast.clock.is_none() {
                    self.unclocked.push((prop_id.clone(), start.line));
                }
                self.out.file.line_map.insert(prop_id.clone(), (start.line, end.line));
                self.out.file.properties.push(PropertyDecl {
                    prop_id,
                    kind,
                    ast,
                    lines: (start.line, end.line),
                    text,
                });
            }
            Err(d) => {
                self.out.diagnostics.push(d.with_prop(prop_id.clone()));
                self.skip_statement();
                let end = self.last_span();
                self.out.broken.push(BrokenProperty {
                    prop_id,
                    kind,
                    lines: (start.line, end.line),
                    text: self.src.slice(start, end),
                });
            }
        }
    }

    /// Span of the most recently consumed token.
    fn last_span(&self) -> Span {
        self.ts.span_at(self.ts.position().saturating_sub(1))
    }

    fn property_body(&mut self) -> PResult<PropAst> {
        let clock = if self.ts.is_punct("@") { Some(self.clock_event()?) } else { None };
        let disable = if self.ts.eat_keyword("disable") {
            self.ts.expect_keyword("iff")?;
            self.ts.expect_punct("(")?;
            let e = parse_expr(&mut self.ts, SVA_DIALECT)?;
            self.ts.expect_punct(")")?;
            Some(e)
        } else {
            None
        };
        let first = self.sequence()?;
        let imp = match self.ts.peek() {
            Tok::Punct("|->") => Some(Implication::Overlapped),
            Tok::Punct("|=>") => Some(Implication::NonOverlapped),
            _ => None,
        };
        let (antecedent, consequent) = match imp {
            Some(k) => {
                self.ts.next();
                let c = self.sequence()?;
                (Some((first, k)), c)
            }
            None => (None, first),
        };
        if matches!(self.ts.peek(), Tok::Punct("|->" | "|=>")) {
            return Err(err_at(
                DiagCode::NestedImplication,
                self.ts.span(),
                "implication is only allowed at the top level of a property",
            ));
        }
        Ok(PropAst {
            clock,
            disable,
            antecedent,
            consequent,
        })
    }

    fn delay(&mut self) -> PResult<Delay> {
        let at = self.ts.span();
        self.ts.expect_punct("##")?;
        let d = if self.ts.eat_punct("[") {
            let m = self.number()?;
            self.ts.expect_punct(":")?;
            if matches!(self.ts.peek(), Tok::SysIdent(_)) || self.ts.is_punct("$") {
                return Err(err_at(DiagCode::Unsupported, at, "unbounded delay ranges are not supported"));
            }
            let n = self.number()?;
            self.ts.expect_punct("]")?;
            if m > n {
                return Err(err_at(DiagCode::Syntax, at, format!("empty delay range ##[{m}:{n}]")));
            }
            Delay { min: m, max: n }
        } else {
            Delay::exact(self.number()?)
        };
        self.check_delay(d.max, at)?;
        Ok(d)
    }

    fn check_delay(&self, n: u32, at: Span) -> PResult<()> {
        if n > self.max_delay {
            return Err(err_at(
                DiagCode::DelayBound,
                at,
                format!("delay {n} exceeds the maximum of {}", self.max_delay),
            ));
        }
        Ok(())
    }

    fn number(&mut self) -> PResult<u32> {
        match self.ts.peek().clone() {
            Tok::Number { value, .. } if value <= u32::MAX as u64 => {
                self.ts.next();
                Ok(value as u32)
            }
            other => Err(self.ts.error_here(format!("expected delay count, found {}", describe(&other)))),
        }
    }

    fn sequence(&mut self) -> PResult<Sequence> {
        let mut elems: Vec<SeqElem> = Vec::new();
        let mut pending = if self.ts.is_punct("##") { self.delay()? } else { Delay::default() };
        loop {
            let at = self.ts.span();
            let save = self.ts.position();
            match parse_expr(&mut self.ts, SVA_DIALECT) {
                Ok(expr) => elems.push(SeqElem { delay: pending, expr }),
                Err(_) if matches!(self.ts.tok_at(save), Tok::Punct("(")) => {
                    // a parenthesized sub-sequence, flattened into this one
                    self.ts.reset(save);
                    self.ts.expect_punct("(")?;
                    let inner = self.sequence()?;
                    if matches!(self.ts.peek(), Tok::Punct("|->" | "|=>")) {
                        return Err(err_at(
                            DiagCode::NestedImplication,
                            self.ts.span(),
                            "implication is only allowed at the top level of a property",
                        ));
                    }
                    self.ts.expect_punct(")")?;
                    let mut it = inner.0.into_iter();
                    let first = it.next().expect("sequences are non-empty");
                    let d = Delay {
                        min: pending.min + first.delay.min,
                        max: pending.max + first.delay.max,
                    };
                    self.check_delay(d.max, at)?;
                    elems.push(SeqElem { delay: d, expr: first.expr });
                    elems.extend(it);
                }
                Err(e) => return Err(e),
            }
            if self.ts.is_punct("##") {
                pending = self.delay()?;
            } else {
                break;
            }
        }
        Ok(Sequence(elems))
    }

}

pub(crate) fn parse_macro_body(body: &str) -> PResult<Expr> {
    let toks = tokenize(body)?;
    let mut ts = TokenStream::new(toks);
    let e = parse_expr(&mut ts, SVA_DIALECT)?;
    if !ts.at_eof() {
        return Err(ts.error_here(format!("unexpected {} after expression", describe(ts.peek()))));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::DiagCode;

    const CLK: &str = "default clocking @(posedge clk); endclocking\n";

    #[test]
    fn overlapped_implication_with_delay() {
        let f = parse_properties("assert property (@(posedge clk) a |-> ##1 b);").unwrap();
        assert_eq!(f.properties.len(), 1);
        let p = &f.properties[0];
        assert_eq!(p.kind, PropKind::Assertion);
        assert_eq!(p.prop_id, "ANON-1");
        let (ante, k) = p.ast.antecedent.as_ref().unwrap();
        assert_eq!(k, &Implication::Overlapped);
        assert_eq!(ante.0.len(), 1);
        assert_eq!(p.ast.consequent.0[0].delay, Delay::exact(1));
        assert_eq!(p.text, "assert property (@(posedge clk) a |-> ##1 b);");
    }

    #[test]
    fn macro_before_definition_is_attributed() {
        let src = format!("{CLK}PROP_001: assert property (`FULL |-> !wr);\n`define FULL cnt == 2\n");
        let e = parse_properties(&src).unwrap_err();
        let d = e.errors().next().unwrap();
        assert_eq!(d.code, DiagCode::UndefinedMacro);
        assert_eq!(d.prop_id.as_deref(), Some("PROP-001"));
        assert_eq!(d.line, 2);
        // lenient mode keeps the property
        let l = parse_lenient(&src);
        assert_eq!(l.file.properties.len(), 1);
        assert!(l.broken.is_empty());
    }

    #[test]
    fn nested_implication_rejected() {
        for src in [
            "P_1: assert property (@(posedge clk) a |-> b |-> c);",
            "P_1: assert property (@(posedge clk) a |-> (b |=> c));",
        ] {
            let e = parse_properties(src).unwrap_err();
            let d = e.errors().next().unwrap();
            assert_eq!(d.code, DiagCode::NestedImplication, "{src}");
            assert_eq!(d.prop_id.as_deref(), Some("P-1"));
        }
    }

    #[test]
    fn delay_bound_enforced() {
        let ok = parse_properties("assert property (@(posedge clk) a |-> ##32 b);");
        assert!(ok.is_ok());
        let e = parse_properties("assert property (@(posedge clk) a |-> ##[1:33] b);").unwrap_err();
        assert_eq!(e.items[0].code, DiagCode::DelayBound);
        let e = parse_properties_with("assert property (@(posedge clk) a ##3 b);", 2).unwrap_err();
        assert_eq!(e.items[0].code, DiagCode::DelayBound);
    }

    #[test]
    fn parenthesized_sequences_flatten() {
        let f = parse_properties(&format!("{CLK}P_1: cover property ((a ##1 b) ##2 c);\nP_2: cover property (a ##1 (##1 b ##1 c));")).unwrap();
        let d: Vec<Vec<u32>> = f
            .properties
            .iter()
            .map(|p| p.ast.consequent.0.iter().map(|e| e.delay.max).collect())
            .collect();
        assert_eq!(d, vec![vec![0, 1, 2], vec![0, 2, 1]]);
        let f = parse_properties(&format!("{CLK}P_1: assert property ((a || b) && c |=> d);")).unwrap();
        assert_eq!(f.properties[0].ast.antecedent.as_ref().unwrap().0 .0.len(), 1);
    }

    #[test]
    fn missing_clock_reported() {
        let e = parse_properties("P_7: assert property (a |-> b);").unwrap_err();
        assert_eq!(e.items[0].code, DiagCode::Clocking);
        assert_eq!(e.items[0].prop_id.as_deref(), Some("P-7"));
        // a default clocking later in the file still applies
        assert!(parse_properties(&format!("P_7: assert property (a |-> b);\n{CLK}")).is_ok());
    }

    #[test]
    fn lenient_keeps_good_statements() {
        let src = format!("{CLK}P_1: assert property (a |-> b);\nP_2: assert property (a |-> (b);\nP_3: assume property (!c);\n");
        let l = parse_lenient(&src);
        let ids: Vec<_> = l.file.properties.iter().map(|p| p.prop_id.as_str()).collect();
        assert_eq!(ids, vec!["P-1", "P-3"]);
        assert_eq!(l.broken.len(), 1);
        assert_eq!(l.broken[0].prop_id, "P-2");
        assert_eq!(l.broken[0].text, "P_2: assert property (a |-> (b);");
        assert_eq!(l.diagnostics.items[0].prop_id.as_deref(), Some("P-2"));
    }

    #[test]
    fn bad_character_only_breaks_its_statement() {
        let src = format!("{CLK}P_1: assert property (a % b);\nP_2: assert property (c);\n");
        let l = parse_lenient(&src);
        assert_eq!(l.file.properties.len(), 1);
        assert_eq!(l.broken[0].prop_id, "P-1");
    }

    #[test]
    fn recursive_macro_rejected() {
        let e = parse_properties("`define A b\n`define B `A && c\n").unwrap_err();
        assert_eq!(e.items[0].code, DiagCode::RecursiveMacro);
    }

    #[test]
    fn disable_iff_and_sampled_functions() {
        let f = parse_properties(&format!(
            "{CLK}P_1: assert property (disable iff (rst) $rose(req) |=> ##[0:2] ack && $past(req, 2));"
        ))
        .unwrap();
        let p = &f.properties[0];
        assert!(p.ast.disable.is_some());
        assert_eq!(p.ast.antecedent.as_ref().unwrap().1, Implication::NonOverlapped);
        assert_eq!(p.ast.consequent.0[0].delay, Delay { min: 0, max: 2 });
    }
}
