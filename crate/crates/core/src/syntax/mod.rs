// SPDX-License-Identifier: Apache-2.0

//! Lexing, expression trees and diagnostics common to both source languages.

pub mod diag;
pub mod expr;
pub mod lexer;

pub use diag::{DiagCode, Diagnostic, Diagnostics, Severity};
pub use expr::{BinaryOp, Expr, SysFunc, UnaryOp};
pub use lexer::Span;
