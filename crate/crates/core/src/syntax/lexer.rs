// SPDX-License-Identifier: Apache-2.0

//! Tokenizer shared by the RTL and property-file parsers.

use super::diag::{DiagCode, Diagnostic};

/// Source position. Spans never take part in structural equality so that
/// re-parsed ASTs compare equal regardless of layout.
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// `$name`
    SysIdent(String),
    /// `` `name ``
    MacroRef(String),
    /// `` `define NAME body``; body is the raw remainder of the line.
    Define { name: String, body: String },
    Number { value: u64, width: Option<u32> },
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first.
const PUNCTS: &[&str] = &[
    "|->", "|=>", "##", "&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "~&", "~|", "~^", "(", ")",
    "[", "]", "{", "}", ";", ":", ",", ".", "@", "#", "?", "=", "<", ">", "+", "-", "~", "!", "&",
    "|", "^", "*",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
    }
    .run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
}

impl Lexer {
    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::error(DiagCode::Syntax, self.line, self.col, msg)
    }

    fn run(mut self) -> Result<Vec<Token>, Diagnostic> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let span = Span {
                line: self.line,
                col: self.col,
            };
            let Some(c) = self.peek(0) else {
                out.push(Token { tok: Tok::Eof, span });
                return Ok(out);
            };
            let tok = if c.is_ascii_alphabetic() || c == '_' {
                Tok::Ident(self.word())
            } else if c == '$' {
                self.bump();
                let w = self.word();
                if w.is_empty() {
                    return Err(self.err("expected system function name after '$'"));
                }
                Tok::SysIdent(w)
            } else if c == '`' {
                self.bump();
                let w = self.word();
                if w.is_empty() {
                    return Err(self.err("expected macro name after '`'"));
                }
                if w == "define" {
                    self.define()?
                } else {
                    Tok::MacroRef(w)
                }
            } else if c.is_ascii_digit() || c == '\'' {
                self.number()?
            } else {
                let p = PUNCTS
                    .iter()
                    .find(|p| p.chars().enumerate().all(|(i, pc)| self.peek(i) == Some(pc)))
                    .ok_or_else(|| self.err(format!("unexpected character '{c}'")))?;
                for _ in 0..p.len() {
                    self.bump();
                }
                Tok::Punct(p)
            };
            out.push(Token { tok, span });
        }
    }

    fn skip_trivia(&mut self) -> Result<(), Diagnostic> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => return Err(self.err("unterminated block comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn define(&mut self) -> Result<Tok, Diagnostic> {
        while matches!(self.peek(0), Some(' ' | '\t')) {
            self.bump();
        }
        let name = self.word();
        if name.is_empty() {
            return Err(self.err("expected macro name after `define"));
        }
        let mut body = String::new();
        while let Some(c) = self.peek(0) {
            if c == '\n' {
                break;
            }
            body.push(c);
            self.bump();
        }
        let body = match body.find("//") {
            Some(i) => body[..i].to_string(),
            None => body,
        };
        Ok(Tok::Define {
            name,
            body: body.trim().to_string(),
        })
    }

    fn digits(&mut self, radix: u32) -> Result<u64, Diagnostic> {
        let mut value: u64 = 0;
        let mut any = false;
        while let Some(c) = self.peek(0) {
            if c == '_' {
                self.bump();
                continue;
            }
            let Some(d) = c.to_digit(radix) else { break };
            value = value
                .checked_mul(radix as u64)
                .and_then(|v| v.checked_add(d as u64))
                .ok_or_else(|| self.err("literal exceeds 64 bits"))?;
            any = true;
            self.bump();
        }
        if !any {
            return Err(self.err("expected digits"));
        }
        Ok(value)
    }

    fn number(&mut self) -> Result<Tok, Diagnostic> {
        let size = if self.peek(0) == Some('\'') {
            None
        } else {
            Some(self.digits(10)?)
        };
        if self.peek(0) != Some('\'') {
            return Ok(Tok::Number {
                value: size.unwrap_or(0),
                width: None,
            });
        }
        self.bump();
        let radix = match self.bump().map(|c| c.to_ascii_lowercase()) {
            Some('b') => 2,
            Some('o') => 8,
            Some('d') => 10,
            Some('h') => 16,
            _ => return Err(self.err("expected base specifier b, o, d or h")),
        };
        let value = self.digits(radix)?;
        let width = match size {
            Some(0) => return Err(self.err("zero-width literal")),
            Some(w) if w > 64 => return Err(self.err("literal wider than 64 bits")),
            Some(w) => {
                let w = w as u32;
                if w < 64 && value >> w != 0 {
                    return Err(self.err(format!("value {value} does not fit in {w} bits")));
                }
                Some(w)
            }
            None => None,
        };
        Ok(Tok::Number { value, width })
    }
}

/// Cursor over a token vector.
pub struct TokenStream {
    toks: Vec<Token>,
    pos: usize,
}

impl TokenStream {
    pub fn new(toks: Vec<Token>) -> Self {
        TokenStream { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos.min(self.toks.len() - 1)].tok
    }

    pub fn peek_at(&self, off: usize) -> &Tok {
        &self.toks[(self.pos + off).min(self.toks.len() - 1)].tok
    }

    pub fn span(&self) -> Span {
        self.toks[self.pos.min(self.toks.len() - 1)].span
    }

    // never runs dry: the end token repeats, so this is not an Iterator
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Token {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn error_here(&self, msg: impl Into<String>) -> Diagnostic {
        let s = self.span();
        Diagnostic::error(DiagCode::Syntax, s.line, s.col, msg)
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<Span, Diagnostic> {
        let span = self.span();
        if self.eat_punct(p) {
            Ok(span)
        } else {
            Err(self.error_here(format!("expected '{p}', found {}", describe(self.peek()))))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<Span, Diagnostic> {
        let span = self.span();
        if self.eat_keyword(kw) {
            Ok(span)
        } else {
            Err(self.error_here(format!("expected '{kw}', found {}", describe(self.peek()))))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, Span), Diagnostic> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok((s, span))
            }
            other => Err(self.error_here(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    pub fn tok_at(&self, pos: usize) -> &Tok {
        &self.toks[pos.min(self.toks.len() - 1)].tok
    }

    pub fn span_at(&self, pos: usize) -> Span {
        self.toks[pos.min(self.toks.len() - 1)].span
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn reset(&mut self, pos: usize) {
        self.pos = pos;
    }
}

pub fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::SysIdent(s) => format!("'${s}'"),
        Tok::MacroRef(s) => format!("'`{s}'"),
        Tok::Define { name, .. } => format!("'`define {name}'"),
        Tok::Number { value, .. } => format!("number {value}"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn sized_literals() {
        assert_eq!(
            toks("4'b1010 8'hFF 'd3 12"),
            vec![
                Tok::Number { value: 10, width: Some(4) },
                Tok::Number { value: 255, width: Some(8) },
                Tok::Number { value: 3, width: None },
                Tok::Number { value: 12, width: None },
                Tok::Eof
            ]
        );
    }

    #[test]
    fn literal_overflow_rejected() {
        assert!(tokenize("2'd7").is_err());
    }

    #[test]
    fn temporal_operators() {
        assert_eq!(
            toks("a |-> ##[1:2] b |=> c"),
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("|->"),
                Tok::Punct("##"),
                Tok::Punct("["),
                Tok::Number { value: 1, width: None },
                Tok::Punct(":"),
                Tok::Number { value: 2, width: None },
                Tok::Punct("]"),
                Tok::Ident("b".into()),
                Tok::Punct("|=>"),
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn define_takes_rest_of_line() {
        let t = toks("`define FULL (count == 2) // note\nx");
        assert_eq!(
            t[0],
            Tok::Define {
                name: "FULL".into(),
                body: "(count == 2)".into()
            }
        );
        assert_eq!(t[1], Tok::Ident("x".into()));
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("/* a\n b */ // c\n  foo").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("foo".into()));
        assert_eq!((t[0].span.line, t[0].span.col), (3, 3));
    }
}
