// SPDX-License-Identifier: Apache-2.0

// Parsed once and returned once; boxing buys nothing here.
#![allow(clippy::large_enum_variant, clippy::result_large_err)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use kgfv_core::ir::{diff_runs, load_run, StoreError};
use kgfv_core::kg::{render_html, Graph, GraphError};
use kgfv_core::pipeline::{render_table, report, run_all, BackendKind, PipelineError, RunConfig};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
}

#[derive(Parser)]
#[command(name = "kgfv", version, about = "Specification-to-assertion pipeline with formal checking")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline and store a new run directory.
    Run(RunArgs),
    /// Print the summary table of a stored run.
    Report {
        #[arg(long)]
        run: String,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Write the knowledge graph of a stored run as standalone HTML.
    Graph {
        #[arg(long)]
        run: String,
        #[arg(long)]
        html: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Compare two stored runs and print the difference as JSON.
    Diff {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    /// RTL source file; repeat for multi-file designs.
    #[arg(long)]
    rtl: Vec<PathBuf>,
    #[arg(long)]
    top: Option<String>,
    #[arg(long)]
    rulebook: Option<PathBuf>,
    /// Root directory for run directories.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["live", "scripted", "replay"])]
    backend: Option<String>,
    /// Response rules for the scripted backend.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Recorded transcript for the replay backend.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    radius: Option<u32>,
    #[arg(long)]
    max_states: Option<usize>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long)]
    cex_iters: Option<u32>,
    #[arg(long)]
    cov_iters: Option<u32>,
    /// Fixed creation time (RFC 3339) for reproducible run directories.
    #[arg(long)]
    frozen_time: Option<String>,
    /// TOML file whose keys override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

const PATH_KEYS: &[&str] = &["spec", "rulebook", "script", "transcript"];

/// Make relative paths in a config table relative to the file's directory.
fn rebase(table: &mut serde_json::Map<String, Value>, base: &Path) {
    let fix = |v: &mut Value| {
        if let Value::String(s) = v {
            if Path::new(s.as_str()).is_relative() {
                *s = base.join(s.as_str()).to_string_lossy().into_owned();
            }
        }
    };
    for k in PATH_KEYS {
        if let Some(v) = table.get_mut(*k) {
            fix(v);
        }
    }
    if let Some(Value::Array(items)) = table.get_mut("rtl") {
        items.iter_mut().for_each(fix);
    }
}

fn build_config(a: RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(v) = a.spec {
        cfg.spec = v;
    }
    if !a.rtl.is_empty() {
        cfg.rtl = a.rtl;
    }
    cfg.top = a.top.or(cfg.top);
    cfg.rulebook = a.rulebook.or(cfg.rulebook);
    if let Some(v) = a.out {
        cfg.out = v;
    }
    if let Some(b) = a.backend {
        cfg.backend = b.parse::<BackendKind>()?;
    }
    cfg.script = a.script.or(cfg.script);
    cfg.transcript = a.transcript.or(cfg.transcript);
    cfg.radius = a.radius.unwrap_or(cfg.radius);
    cfg.max_states = a.max_states.unwrap_or(cfg.max_states);
    cfg.max_depth = a.max_depth.unwrap_or(cfg.max_depth);
    cfg.cex_iters = a.cex_iters.unwrap_or(cfg.cex_iters);
    cfg.cov_iters = a.cov_iters.unwrap_or(cfg.cov_iters);
    cfg.frozen_time = a.frozen_time.or(cfg.frozen_time);

    let Some(path) = a.config else { return Ok(cfg) };
    let bad = |message: String| CliError::Config {
        path: path.clone(),
        message,
    };
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let parsed: toml::Table = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let Value::Object(mut over) = serde_json::to_value(parsed).map_err(|e| bad(e.to_string()))? else {
        unreachable!("a TOML table serializes to an object")
    };
    let base = path.parent().unwrap_or(Path::new("."));
    rebase(&mut over, base);
    if let Some(out) = over.remove("out") {
        let out = out.as_str().ok_or_else(|| bad("'out' must be a string".into()))?;
        cfg.out = base.join(out);
    }
    let keep_out = cfg.out.clone();
    let Value::Object(mut merged) = serde_json::to_value(&cfg).map_err(|e| bad(e.to_string()))? else {
        unreachable!("RunConfig serializes to an object")
    };
    merged.extend(over);
    let mut cfg: RunConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| bad(e.to_string()))?;
    cfg.out = keep_out;
    Ok(cfg)
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(args) => {
            let cfg = build_config(args)?;
            let outcome = run_all(&cfg)?;
            println!("{}", render_table(&outcome.report));
            println!("run {} written to {}", outcome.run_id, outcome.run_dir.display());
        }
        Command::Report { run, out } => {
            let b = load_run(&out, &run)?;
            println!("{}", render_table(&report(&b)));
        }
        Command::Graph { run, html, out } => {
            let b = load_run(&out, &run)?;
            let g = Graph::from_bundle(&b)?;
            std::fs::write(&html, render_html(&g, &format!("kgfv run {run}"))).map_err(io_err(&html))?;
            println!("{} nodes, {} edges -> {}", g.node_count(), g.edge_count(), html.display());
        }
        Command::Diff { a, b, out } => {
            let d = diff_runs(&load_run(&out, &a)?, &load_run(&out, &b)?);
            println!("{}", serde_json::to_string_pretty(&d).expect("diff serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
