// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagCode {
    Syntax,
    Unsupported,
    UndefinedMacro,
    RecursiveMacro,
    NestedImplication,
    DelayBound,
    Duplicate,
    Undeclared,
    AmbiguousPath,
    Width,
    Cycle,
    UnresolvedInstance,
    MultipleDrivers,
    Latch,
    Clocking,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Syntax => "SYNTAX",
            DiagCode::Unsupported => "UNSUPPORTED",
            DiagCode::UndefinedMacro => "UNDEFINED_MACRO",
            DiagCode::RecursiveMacro => "RECURSIVE_MACRO",
            DiagCode::NestedImplication => "NESTED_IMPLICATION",
            DiagCode::DelayBound => "DELAY_BOUND",
            DiagCode::Duplicate => "DUPLICATE",
            DiagCode::Undeclared => "UNDECLARED",
            DiagCode::AmbiguousPath => "AMBIGUOUS_PATH",
            DiagCode::Width => "WIDTH",
            DiagCode::Cycle => "CYCLE",
            DiagCode::UnresolvedInstance => "UNRESOLVED_INSTANCE",
            DiagCode::MultipleDrivers => "MULTIPLE_DRIVERS",
            DiagCode::Latch => "LATCH",
            DiagCode::Clocking => "CLOCKING",
        }
    }
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One parser, elaboration or binding message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: u32,
    pub column: u32,
    pub code: DiagCode,
    pub message: String,
    /// Enclosing property, when the message was raised inside one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop_id: Option<String>,
}

impl Diagnostic {
    pub fn error(code: DiagCode, line: u32, column: u32, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            line,
            column,
            code,
            message: message.into(),
            prop_id: None,
        }
    }

    pub fn warning(code: DiagCode, line: u32, column: u32, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(code, line, column, message)
        }
    }

    pub fn with_prop(mut self, prop_id: impl Into<String>) -> Self {
        self.prop_id = Some(prop_id.into());
        self
    }

    /// `file:line:col: severity[CODE]: message`
    pub fn render(&self, file: &str) -> String {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        format!(
            "{file}:{}:{}: {sev}[{}]: {}",
            self.line, self.column, self.code, self.message
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub items: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, d: Diagnostic) {
        self.items.push(d);
    }

    pub fn has_errors(&self) -> bool {
        self.items.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.items.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn render(&self, file: &str) -> String {
        let mut out = String::new();
        for d in &self.items {
            out.push_str(&d.render(file));
            out.push('\n');
        }
        out
    }
}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics { items: vec![d] }
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render("<input>").trim_end())
    }
}

impl std::error::Error for Diagnostics {}
