// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn kgfv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgfv")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn run_id(out: &str) -> String {
    out.lines().find_map(|l| l.strip_prefix("run ")).unwrap().split_whitespace().next().unwrap().to_string()
}

fn fifo_args(f: &Path, script: &str) -> Vec<String> {
    let d = f.join("fifo");
    vec![
        "run".into(),
        "--spec".into(),
        d.join("spec.md").display().to_string(),
        "--rtl".into(),
        d.join("fifo2.v").display().to_string(),
        "--top".into(),
        "fifo2".into(),
        "--backend".into(),
        "scripted".into(),
        "--script".into(),
        d.join(script).display().to_string(),
        "--frozen-time".into(),
        "2026-01-01T00:00:00Z".into(),
    ]
}

#[test]
fn run_then_report_graph_and_diff() {
    let tmp = tempfile::tempdir().unwrap();
    let args = fifo_args(&fixtures(), "script.json");
    let out = stdout(&kgfv(&args.iter().map(String::as_str).collect::<Vec<_>>(), tmp.path()));
    assert!(out.contains("end-to-end           | properties T | P | F       | 5 | 5 | 0"), "{out}");
    let id = run_id(&out);
    assert!(tmp.path().join("runs").join(&id).join("nodes.csv").is_file());

    let rep = stdout(&kgfv(&["report", "--run", &id], tmp.path()));
    assert!(rep.contains("5 | 5 | 0"));
    // the table printed at the end of the run is the stored run's table
    assert!(out.starts_with(&rep.trim_end().to_string()));

    let html = tmp.path().join("g.html");
    let g = stdout(&kgfv(&["graph", "--run", &id, "--html", html.to_str().unwrap()], tmp.path()));
    assert!(g.contains("nodes"));
    assert!(std::fs::read_to_string(&html).unwrap().contains("<html"));

    let d = stdout(&kgfv(&["diff", "--a", &id, "--b", &id], tmp.path()));
    let v: serde_json::Value = serde_json::from_str(&d).unwrap();
    assert_eq!(v["transitions"], serde_json::json!([]));
}

#[test]
fn toml_config_overrides_with_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let f = fixtures().join("fifo");
    let cfg = tmp.path().join("kgfv.toml");
    for name in ["spec.md", "fifo2.v", "script.json"] {
        std::fs::copy(f.join(name), tmp.path().join(name)).unwrap();
    }
    std::fs::write(
        &cfg,
        "spec = \"spec.md\"\nrtl = [\"fifo2.v\"]\ntop = \"fifo2\"\nbackend = \"scripted\"\nscript = \"script.json\"\n\
         out = \"stored\"\nfrozen_time = \"2026-01-01T00:00:00Z\"\n",
    )
    .unwrap();
    let elsewhere = tempfile::tempdir().unwrap();
    let out = stdout(&kgfv(&["run", "--config", cfg.to_str().unwrap()], elsewhere.path()));
    let id = run_id(&out);
    assert!(tmp.path().join("stored").join(&id).is_dir());
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kgfv(&["report", "--run", "nope"], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let mut args = fifo_args(&fixtures(), "script.json");
    args[2] = tmp.path().join("missing.md").display().to_string();
    let o = kgfv(&args.iter().map(String::as_str).collect::<Vec<_>>(), tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.md"));
    assert!(!tmp.path().join("runs").exists());
}
