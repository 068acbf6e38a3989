// SPDX-License-Identifier: Apache-2.0

//! Assertion-language subset: parsing, canonical emission and binding of
//! identifiers to hierarchical design signals.

pub mod ast;
mod bind;
mod emit;
mod parser;

pub use ast::{
    id_to_label, label_to_id, Delay, Implication, MacroDef, PropAst, PropKind, PropertyDecl, PropertyFile, SeqElem,
    Sequence,
};
pub use bind::{bind, bind_each, bind_one, exact_or_suffix, BindError, BindErrorKind, BindErrors, BoundProperty};
pub use emit::{emit_properties, isolated_wrapper, HEADER};
pub use parser::{
    parse_lenient, parse_lenient_with, parse_properties, parse_properties_with, BrokenProperty, LenientParse,
    DEFAULT_MAX_DELAY,
};
