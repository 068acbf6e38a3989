// SPDX-License-Identifier: Apache-2.0

//! The knowledge graph: typed nodes and edges materialized from exported
//! rows, bounded-context retrieval, downstream invalidation and signal
//! mention resolution.

mod graph;
mod html;
mod signals;

pub use graph::{
    build_graph, invalidate_downstream, neighborhood, trace_path, ContextBundle, Edge, Graph, GraphError,
    InclusionReason, Member, Node, RetrievalBounds, TaskKind,
};
pub use html::render_html;
pub use signals::{resolve_signal, SignalIndex};
