// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::export::{export_graph, write_edges_csv, write_nodes_csv, ExportError};
use super::types::*;
use super::validate::{validate_bundle, ValidationReport};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bundle failed validation: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{file}: corrupt at byte {offset}: {message}")]
    Corrupt { file: PathBuf, offset: usize, message: String },
    #[error("created_at '{0}' is not an RFC 3339 timestamp")]
    Timestamp(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("artifact serializes")
}

/// SHA-256 (hex) over the bundle's artifacts serialized with sorted keys.
/// The run id, artifact paths and creation time are excluded so equal
/// content always hashes equally.
pub fn content_hash(b: &RunBundle) -> String {
    let mut m = Map::new();
    let mut put = |k: ArtifactKind, v: Option<Value>| {
        if let Some(v) = v {
            m.insert(k.key().to_string(), v);
        }
    };
    put(ArtifactKind::SpecChunks, b.spec_chunks.as_ref().map(to_value));
    put(ArtifactKind::Requirements, b.requirements.as_ref().map(to_value));
    put(ArtifactKind::TestPlan, b.test_plan.as_ref().map(to_value));
    put(ArtifactKind::DesignModel, b.design_model.as_ref().map(to_value));
    put(ArtifactKind::Properties, b.properties.as_ref().map(to_value));
    put(ArtifactKind::TraceLinks, b.trace_links.as_ref().map(to_value));
    put(ArtifactKind::FormalResults, b.formal_results.as_ref().map(to_value));
    put(ArtifactKind::CexCases, b.cex_cases.as_ref().map(to_value));
    put(ArtifactKind::CoverageMetrics, b.coverage_metrics.as_ref().map(to_value));
    let ctx = serde_json::json!({
        "iteration_counts": b.context.iteration_counts,
        "tool_version": b.context.tool_version,
        "config_snapshot": b.context.config_snapshot,
    });
    m.insert(ArtifactKind::RunContext.key().to_string(), ctx);
    m.insert("files".to_string(), to_value(&b.files));
    let text = serde_json::to_string(&Value::Object(m)).expect("value serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `YYYYMMDDTHHMMSSZ-<first 8 hex digits of the content hash>`.
pub fn make_run_id(created_at: &DateTime<Utc>, b: &RunBundle) -> String {
    format!("{}-{}", created_at.format("%Y%m%dT%H%M%SZ"), &content_hash(b)[..8])
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

/// Write the bundle under `root/<run_id>/`. Everything goes to a staging
/// directory first and is renamed into place, so readers never see a
/// half-written run. An empty `created_at` is filled with the current time.
pub fn save_run(b: &RunBundle, root: &Path) -> Result<RunContext, StoreError> {
    let report = validate_bundle(b);
    if !report.is_empty() {
        return Err(StoreError::Invalid(report));
    }
    let created: DateTime<Utc> = if b.context.created_at.is_empty() {
        Utc::now()
    } else {
        DateTime::parse_from_rfc3339(&b.context.created_at)
            .map_err(|_| StoreError::Timestamp(b.context.created_at.clone()))?
            .with_timezone(&Utc)
    };
    let mut ctx = b.context.clone();
    ctx.created_at = created.to_rfc3339_opts(SecondsFormat::Secs, true);
    ctx.run_id = make_run_id(&created, b);
    ctx.artifact_paths.clear();

    let mut docs: Vec<(ArtifactKind, String)> = Vec::new();
    let mut add = |k: ArtifactKind, text: Option<String>| {
        if let Some(t) = text {
            docs.push((k, t));
        }
    };
    add(ArtifactKind::SpecChunks, b.spec_chunks.as_ref().map(pretty));
    add(ArtifactKind::Requirements, b.requirements.as_ref().map(pretty));
    add(ArtifactKind::TestPlan, b.test_plan.as_ref().map(pretty));
    add(ArtifactKind::DesignModel, b.design_model.as_ref().map(pretty));
    add(ArtifactKind::Properties, b.properties.as_ref().map(pretty));
    add(ArtifactKind::TraceLinks, b.trace_links.as_ref().map(pretty));
    add(ArtifactKind::FormalResults, b.formal_results.as_ref().map(pretty));
    add(ArtifactKind::CexCases, b.cex_cases.as_ref().map(pretty));
    add(ArtifactKind::CoverageMetrics, b.coverage_metrics.as_ref().map(pretty));
    if !docs.is_empty() {
        let mut with_id = b.clone();
        with_id.context.run_id = ctx.run_id.clone();
        let rows = export_graph(&with_id)?;
        docs.push((ArtifactKind::Nodes, write_nodes_csv(&rows.nodes)));
        docs.push((ArtifactKind::Edges, write_edges_csv(&rows.edges)));
    }
    for (k, _) in &docs {
        ctx.artifact_paths.insert(k.key().to_string(), k.file_name().to_string());
    }
    ctx.artifact_paths.insert(
        ArtifactKind::RunContext.key().to_string(),
        ArtifactKind::RunContext.file_name().to_string(),
    );
    docs.push((ArtifactKind::RunContext, pretty(&ctx)));

    fs::create_dir_all(root).map_err(io_err(root))?;
    let stage = root.join(format!(".staging-{}-{}", ctx.run_id, std::process::id()));
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(io_err(&stage))?;
    }
    fs::create_dir_all(&stage).map_err(io_err(&stage))?;
    let write = |rel: &str, text: &str| -> Result<(), StoreError> {
        let p = stage.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&p, text).map_err(io_err(&p))
    };
    for (rel, text) in &b.files {
        write(rel, text)?;
    }
    for (k, text) in &docs {
        write(k.file_name(), text)?;
    }
    let dest = root.join(&ctx.run_id);
    if dest.exists() {
        fs::remove_dir_all(&dest).map_err(io_err(&dest))?;
    }
    fs::rename(&stage, &dest).map_err(io_err(&dest))?;
    Ok(ctx)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn read_doc<T: DeserializeOwned>(dir: &Path, k: ArtifactKind) -> Result<Option<T>, StoreError> {
    let path = dir.join(k.file_name());
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(&path)(e)),
    };
    serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Corrupt {
        offset: if e.is_eof() {
            text.len()
        } else {
            byte_offset(&text, e.line(), e.column())
        },
        message: e.to_string(),
        file: path,
    })
}

fn collect_files(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), StoreError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let p = entry.map_err(io_err(dir))?.path();
        if p.is_dir() {
            collect_files(base, &p, out)?;
        } else if p.parent() != Some(base) {
            out.push(p);
        }
    }
    Ok(())
}

/// Load `root/<run_id>/`. Missing artifact files leave their collection
/// absent; a file that fails to parse is an error naming it.
pub fn load_run(root: &Path, run_id: &str) -> Result<RunBundle, StoreError> {
    let dir = root.join(run_id);
    let ctx: RunContext = read_doc(&dir, ArtifactKind::RunContext)?.ok_or_else(|| StoreError::Io {
        path: dir.join(ArtifactKind::RunContext.file_name()),
        source: io::Error::new(io::ErrorKind::NotFound, "run context missing"),
    })?;
    let mut files = Vec::new();
    collect_files(&dir, &dir, &mut files)?;
    let mut b = RunBundle {
        context: ctx,
        spec_chunks: read_doc(&dir, ArtifactKind::SpecChunks)?,
        requirements: read_doc(&dir, ArtifactKind::Requirements)?,
        test_plan: read_doc(&dir, ArtifactKind::TestPlan)?,
        design_model: read_doc(&dir, ArtifactKind::DesignModel)?,
        properties: read_doc(&dir, ArtifactKind::Properties)?,
        trace_links: read_doc(&dir, ArtifactKind::TraceLinks)?,
        formal_results: read_doc(&dir, ArtifactKind::FormalResults)?,
        cex_cases: read_doc(&dir, ArtifactKind::CexCases)?,
        coverage_metrics: read_doc(&dir, ArtifactKind::CoverageMetrics)?,
        files: Default::default(),
    };
    for p in files {
        let rel = p
            .strip_prefix(&dir)
            .expect("walked under run dir")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let text = fs::read_to_string(&p).map_err(io_err(&p))?;
        b.files.insert(rel, text);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> RunBundle {
        RunBundle {
            context: RunContext {
                tool_version: "t".into(),
                created_at: "2026-01-02T03:04:05Z".into(),
                ..Default::default()
            },
            spec_chunks: Some(vec![SpecChunk {
                chunk_id: "CHUNK-001".into(),
                heading_path: vec!["A".into()],
                text: "x".into(),
                semantic_tags: vec![],
                order_index: 0,
            }]),
            ..Default::default()
        }
    }

    #[test]
    fn empty_bundle_writes_context_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = bundle();
        b.spec_chunks = None;
        let ctx = save_run(&b, dir.path()).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path().join(&ctx.run_id))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, ["run_context.json"]);
    }

    #[test]
    fn round_trip_and_stable_id() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = bundle();
        b.files.insert("cex/CEX-001.vcd".into(), "$end\n".into());
        let ctx = save_run(&b, dir.path()).unwrap();
        assert!(ctx.run_id.starts_with("20260102T030405Z-"));
        let loaded = load_run(dir.path(), &ctx.run_id).unwrap();
        let mut want = b.clone();
        want.context = ctx.clone();
        assert_eq!(loaded, want);
        assert_eq!(save_run(&b, dir.path()).unwrap().run_id, ctx.run_id);
    }

    #[test]
    fn truncated_file_names_offset() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = save_run(&bundle(), dir.path()).unwrap();
        let p = dir.path().join(&ctx.run_id).join("spec_chunks.json");
        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, &text[..40]).unwrap();
        match load_run(dir.path(), &ctx.run_id) {
            Err(StoreError::Corrupt { file, offset, .. }) => {
                assert!(file.ends_with("spec_chunks.json"));
                assert_eq!(offset, 40);
            }
            other => panic!("{other:?}"),
        }
    }
}
