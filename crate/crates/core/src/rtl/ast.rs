// SPDX-License-Identifier: Apache-2.0

use crate::syntax::{Expr, Span};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceFile {
    pub modules: Vec<Module>,
}

impl SourceFile {
    pub fn module(&self, name: &str) -> Option<&Module> {
        self.modules.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    pub span: Span,
    pub params: Vec<ParamDecl>,
    pub ports: Vec<PortDecl>,
    pub nets: Vec<NetDecl>,
    pub items: Vec<Item>,
}

impl Module {
    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn net(&self, name: &str) -> Option<&NetDecl> {
        self.nets.iter().find(|n| n.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Range of a port or net, if any declaration carries one.
    pub fn range_of(&self, name: &str) -> Option<Option<&Range>> {
        if let Some(p) = self.port(name) {
            // a non-ANSI port may carry its range on a later `reg [..] x;`
            return Some(p.range.as_ref().or_else(|| self.net(name).and_then(|n| n.range.as_ref())));
        }
        self.net(name).map(|n| n.range.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub value: Expr,
    pub local: bool,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDecl {
    pub name: String,
    pub dir: Direction,
    pub is_reg: bool,
    pub range: Option<Range>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Wire,
    Reg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetDecl {
    pub name: String,
    pub kind: NetKind,
    pub range: Option<Range>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

/// Index of a statement in the design-wide statement table (`S<n>`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtId(pub u32);

impl StmtId {
    pub fn label(self) -> String {
        format!("S{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Assign(ContAssign),
    Always(AlwaysBlock),
    Instance(Instance),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContAssign {
    pub lhs: String,
    pub rhs: Expr,
    pub id: StmtId,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlwaysKind {
    Clocked { clock: String },
    Comb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlwaysBlock {
    pub kind: AlwaysKind,
    pub body: Stmt,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub params: Vec<(String, Expr)>,
    pub conns: Vec<(String, Option<Expr>)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Block(Vec<Stmt>),
    If {
        cond: Expr,
        then: Box<Stmt>,
        then_arm: StmtId,
        els: Option<(StmtId, Box<Stmt>)>,
        span: Span,
    },
    Case {
        subject: Expr,
        arms: Vec<CaseArm>,
        span: Span,
    },
    Assign {
        lhs: String,
        rhs: Expr,
        blocking: bool,
        id: StmtId,
        span: Span,
    },
    Null,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseArm {
    /// Empty for `default`.
    pub labels: Vec<Expr>,
    pub body: Stmt,
    pub id: StmtId,
    pub span: Span,
}

impl Stmt {
    /// Visit every statement (pre-order).
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::Block(items) => items.iter().for_each(|s| s.walk(f)),
            Stmt::If { then, els, .. } => {
                then.walk(f);
                if let Some((_, e)) = els {
                    e.walk(f);
                }
            }
            Stmt::Case { arms, .. } => arms.iter().for_each(|a| a.body.walk(f)),
            Stmt::Assign { .. } | Stmt::Null => {}
        }
    }

    /// Names assigned anywhere below this statement, first-assignment order.
    pub fn assigned_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.walk(&mut |s| {
            if let Stmt::Assign { lhs, .. } = s {
                if !out.contains(lhs) {
                    out.push(lhs.clone());
                }
            }
        });
        out
    }
}
