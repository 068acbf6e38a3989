// SPDX-License-Identifier: Apache-2.0

pub mod agents;
pub mod engine;
pub mod ir;
pub mod kg;
pub mod pipeline;
pub mod rtl;
pub mod sva;
pub mod syntax;
pub mod vcd;
