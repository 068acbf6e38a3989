// SPDX-License-Identifier: Apache-2.0

//! Typed verification artifacts, their validation, on-disk persistence
//! and the node/edge rows the knowledge graph is built from.

mod diff;
mod export;
mod store;
mod types;
mod validate;

pub use diff::{diff_runs, KindDiff, RunDiff, StatusTransition};
pub use export::{
    export_graph, read_edges_csv, read_nodes_csv, write_edges_csv, write_nodes_csv, EdgeRow, ExportError, GraphRows,
    NodeRow, EDGES_HEADER, NODES_HEADER,
};
pub use store::{content_hash, load_run, make_run_id, save_run, StoreError};
pub use types::*;
pub use validate::{validate_artifact, validate_bundle, NodeKind, ValidationReport, Violation};
