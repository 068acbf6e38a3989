// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropKind {
    Assertion,
    Assumption,
    Cover,
}

impl PropKind {
    pub fn keyword(self) -> &'static str {
        match self {
            PropKind::Assertion => "assert",
            PropKind::Assumption => "assume",
            PropKind::Cover => "cover",
        }
    }
}

/// `##n` is `Delay { min: n, max: n }`; `##[m:n]` keeps both bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Delay {
    pub min: u32,
    pub max: u32,
}

impl Delay {
    pub fn exact(n: u32) -> Delay {
        Delay { min: n, max: n }
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.min == self.max {
            write!(f, "##{}", self.min)
        } else {
            write!(f, "##[{}:{}]", self.min, self.max)
        }
    }
}

/// One boolean step of a sequence, entered `delay` cycles after the
/// previous step (or after the sequence start for the first step).
#[derive(Debug, Clone, PartialEq)]
pub struct SeqElem {
    pub delay: Delay,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence(pub Vec<SeqElem>);

impl Sequence {
    pub fn single(expr: Expr) -> Sequence {
        Sequence(vec![SeqElem {
            delay: Delay::default(),
            expr,
        }])
    }

    pub fn max_delay(&self) -> u32 {
        self.0.iter().map(|e| e.delay.max).max().unwrap_or(0)
    }

    /// Longest span in cycles from the first step to the last.
    pub fn length_bound(&self) -> u32 {
        self.0.iter().map(|e| e.delay.max).sum()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, el) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if i > 0 || el.delay != Delay::default() {
                write!(f, "{} ", el.delay)?;
            }
            write!(f, "{}", el.expr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Implication {
    /// `|->`
    Overlapped,
    /// `|=>`
    NonOverlapped,
}

impl Implication {
    pub fn symbol(self) -> &'static str {
        match self {
            Implication::Overlapped => "|->",
            Implication::NonOverlapped => "|=>",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropAst {
    /// Clock net of an explicit `@(posedge ..)`; `None` inherits the file default.
    pub clock: Option<String>,
    pub disable: Option<Expr>,
    pub antecedent: Option<(Sequence, Implication)>,
    pub consequent: Sequence,
}

impl PropAst {
    pub fn max_delay(&self) -> u32 {
        let a = self.antecedent.as_ref().map_or(0, |(s, _)| s.max_delay());
        a.max(self.consequent.max_delay())
    }

    /// Every boolean expression in the property, disable condition first.
    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = self.disable.iter().collect();
        if let Some((s, _)) = &self.antecedent {
            out.extend(s.0.iter().map(|e| &e.expr));
        }
        out.extend(self.consequent.0.iter().map(|e| &e.expr));
        out
    }

    pub fn map_exprs(self, f: &mut dyn FnMut(Expr) -> Expr) -> PropAst {
        let map_seq = |s: Sequence, f: &mut dyn FnMut(Expr) -> Expr| {
            Sequence(
                s.0.into_iter()
                    .map(|e| SeqElem {
                        delay: e.delay,
                        expr: f(e.expr),
                    })
                    .collect(),
            )
        };
        PropAst {
            clock: self.clock,
            disable: self.disable.map(&mut *f),
            antecedent: self.antecedent.map(|(s, k)| (map_seq(s, f), k)),
            consequent: map_seq(self.consequent, f),
        }
    }
}

impl fmt::Display for PropAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut sep = "";
        if let Some(c) = &self.clock {
            write!(f, "@(posedge {c})")?;
            sep = " ";
        }
        if let Some(d) = &self.disable {
            write!(f, "{sep}disable iff ({d})")?;
            sep = " ";
        }
        if let Some((a, k)) = &self.antecedent {
            write!(f, "{sep}{a} {} ", k.symbol())?;
            sep = "";
        }
        write!(f, "{sep}{}", self.consequent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroDef {
    pub name: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyDecl {
    pub prop_id: String,
    pub kind: PropKind,
    pub ast: PropAst,
    /// First and last source line of the statement.
    pub lines: (u32, u32),
    /// Statement text as it appears in the file.
    pub text: String,
}

impl PropertyDecl {
    /// Canonical single-line statement text.
    pub fn render(&self) -> String {
        format!("{}: {} property ({});", id_to_label(&self.prop_id), self.kind.keyword(), self.ast)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertyFile {
    pub macros: Vec<MacroDef>,
    /// Default clock net.
    pub clocking: Option<String>,
    pub properties: Vec<PropertyDecl>,
    pub line_map: BTreeMap<String, (u32, u32)>,
}

impl PropertyFile {
    pub fn property(&self, id: &str) -> Option<&PropertyDecl> {
        self.properties.iter().find(|p| p.prop_id == id)
    }

    pub fn macro_body(&self, name: &str) -> Option<&str> {
        self.macros.iter().find(|m| m.name == name).map(|m| m.body.as_str())
    }

    /// Property whose line span contains `line`.
    pub fn property_at_line(&self, line: u32) -> Option<&str> {
        self.line_map
            .iter()
            .find(|(_, (a, b))| *a <= line && line <= *b)
            .map(|(id, _)| id.as_str())
    }
}

/// `PROP_001` names property `PROP-001`; labels of any other shape are
/// used verbatim.
pub fn label_to_id(label: &str) -> String {
    match label.rsplit_once('_') {
        Some((head, tail))
            if !head.is_empty()
                && head.chars().all(|c| c.is_ascii_alphabetic())
                && !tail.is_empty()
                && tail.chars().all(|c| c.is_ascii_digit()) =>
        {
            format!("{head}-{tail}")
        }
        _ => label.to_string(),
    }
}

pub fn id_to_label(id: &str) -> String {
    id.replace('-', "_")
}
