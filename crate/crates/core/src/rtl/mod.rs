// SPDX-License-Identifier: Apache-2.0

//! Synthesizable Verilog subset: parsing, design model extraction and
//! elaboration to a flat transition system.

pub mod ast;
mod elab;
mod model;
pub mod netlist;
mod parser;

pub use elab::elaborate;
pub use model::{
    detect_fsms, statement_index, Design, DesignModel, FsmDesc, HierSignal, InstanceInfo, ModuleDecl, ParamInfo,
    PortInfo, Scope, SignalInfo, SignalKind, StatementKind, StatementRef,
};
pub use netlist::{NetExpr, NetModel, NetOp, NetVar, Program};
pub use parser::parse_source;

use crate::syntax::Diagnostics;

/// Parse RTL source and extract its design model.
pub fn parse_rtl(src: &str) -> Result<Design, Diagnostics> {
    let ast = parse_source(src)?;
    let model = model::build_model(&ast)?;
    Ok(Design { model, ast })
}
