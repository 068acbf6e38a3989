// SPDX-License-Identifier: Apache-2.0

use crate::agents::{AgentError, AgentRole, PromptEnvelope, Section, Session, Shape};
use crate::ir::{Category, LinkKind, Priority, Requirement, SpecChunk, TraceLink};

use super::PipelineError;

pub const ROOT_HEADING: &str = "(root)";

/// Split a text or markdown document at heading lines. Text before the
/// first heading, or a document without headings, goes to a chunk under
/// the synthetic heading `(root)`.
pub fn chunk_spec(text: &str) -> Result<Vec<SpecChunk>, PipelineError> {
    if text.trim().is_empty() {
        return Err(PipelineError::EmptySpec);
    }
    let mut chunks: Vec<(Vec<String>, Vec<&str>)> = Vec::new();
    let mut stack: Vec<(usize, String)> = Vec::new();
    let mut pre: Vec<&str> = Vec::new();
    for line in text.lines() {
        let t = line.trim_start();
        let level = t.chars().take_while(|&c| c == '#').count();
        let heading = level > 0 && t[level..].starts_with(' ') && !t[level..].trim().is_empty();
        if heading {
            let title = t[level..].trim().trim_end_matches('#').trim().to_string();
            while stack.last().is_some_and(|(l, _)| *l >= level) {
                stack.pop();
            }
            stack.push((level, title));
            chunks.push((stack.iter().map(|(_, h)| h.clone()).collect(), Vec::new()));
        } else if let Some(c) = chunks.last_mut() {
            c.1.push(line);
        } else {
            pre.push(line);
        }
    }
    let pre_text = pre.join("\n");
    if !pre_text.trim().is_empty() {
        chunks.insert(0, (vec![ROOT_HEADING.to_string()], pre));
    }
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, (heading_path, lines))| SpecChunk {
            chunk_id: format!("CHUNK-{:03}", i + 1),
            heading_path,
            text: lines.join("\n").trim().to_string(),
            semantic_tags: Vec::new(),
            order_index: i as u32,
        })
        .collect())
}

fn category(text: &str) -> Category {
    let t = text.to_ascii_lowercase();
    let has = |ws: &[&str]| ws.iter().any(|w| t.contains(w));
    if has(&["cycle", "within", "latency", "after", "before"]) {
        Category::Timing
    } else if has(&["reset", "never", "overflow", "underflow", "illegal"]) {
        Category::Safety
    } else if has(&["handshake", "interface", "port", "valid", "ready"]) {
        Category::Interface
    } else {
        Category::Functional
    }
}

fn priority(text: &str) -> Priority {
    let t = text.to_ascii_lowercase();
    if t.contains("must") || t.contains("shall") || t.contains("never") {
        Priority::High
    } else if t.contains("may") || t.contains("should") {
        Priority::Low
    } else {
        Priority::Medium
    }
}

/// Ask the backend for the requirements of each chunk. Answer lines that
/// start with `REQ:` become requirements derived from that chunk.
pub fn extract_requirements(s: &mut Session, chunks: &[SpecChunk]) -> Result<(Vec<Requirement>, Vec<TraceLink>), AgentError> {
    let mut reqs = Vec::new();
    let mut links = Vec::new();
    for c in chunks.iter().filter(|c| !c.text.is_empty()) {
        let env = PromptEnvelope::new(AgentRole::SpecAnalyst, format!("ingest/{}", c.chunk_id), Shape::Analysis)
            .with(Section::SpecFragment, format!("{}\n{}", c.heading_path.join(" > "), c.text));
        let answer = s.ask(env)?.raw;
        for line in answer.lines() {
            let Some(text) = line.trim().strip_prefix("REQ:") else { continue };
            let text = text.trim();
            if text.is_empty() {
                continue;
            }
            let req_id = format!("REQ-{:03}", reqs.len() + 1);
            links.push(TraceLink {
                src_id: req_id.clone(),
                dst_id: c.chunk_id.clone(),
                link_kind: LinkKind::DerivesFrom,
            });
            reqs.push(Requirement {
                req_id,
                text: text.to_string(),
                category: category(text),
                priority: priority(text),
                source_chunks: vec![c.chunk_id.clone()],
            });
        }
    }
    Ok((reqs, links))
}
