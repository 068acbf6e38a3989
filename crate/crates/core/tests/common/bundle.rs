// SPDX-License-Identifier: Apache-2.0

//! Random, schema-valid run bundles.

use kgfv_core::ir::*;
use kgfv_core::rtl::parse_rtl;
use kgfv_core::sva::PropKind;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use super::design::gen_design;

const PIECES: &[&str] = &[
    "fifo", "full", "empty", "\"quoted\"", "a,b", "line\nbreak", "tab\there", "naïve", "Größe", "日本語", "emoji 🚦", "back\\slash",
    "  padded  ", "", "x'y", "semi;colon", "{json: [1]}",
];

pub fn text(rng: &mut StdRng) -> String {
    let n = rng.gen_range(0..5);
    (0..n).map(|_| *PIECES.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn some_text(rng: &mut StdRng) -> Option<String> {
    rng.gen_bool(0.5).then(|| text(rng))
}

fn notes(rng: &mut StdRng) -> Vec<AttemptNote> {
    let mut out = Vec::new();
    for kind in [LoopKind::Syntax, LoopKind::Cex, LoopKind::Coverage, LoopKind::Review] {
        for k in 1..=rng.gen_range(0..=3) {
            out.push(AttemptNote {
                loop_kind: kind,
                attempt_no: k,
                diagnosis: text(rng),
                patch_summary: text(rng),
                outcome: *[Outcome::Fixed, Outcome::Retry, Outcome::Disabled].choose(rng).unwrap(),
            });
        }
    }
    out
}

pub fn fifo_rtl() -> String {
    super::read_fixture("fifo2.v")
}

pub fn gen_bundle(rng: &mut StdRng) -> RunBundle {
    let mut b = RunBundle::default();
    b.context.tool_version = format!("kgfv {}", text(rng));
    b.context.created_at = format!("2026-0{}-1{}T0{}:00:00Z", rng.gen_range(1..=9), rng.gen_range(0..=9), rng.gen_range(0..=9));
    b.context.iteration_counts.insert("cex".into(), rng.gen_range(0..5));
    b.context.config_snapshot = serde_json::json!({ "radius": rng.gen_range(1..4), "note": text(rng), "ratio": rng.gen::<f64>() });

    let n_chunks = rng.gen_range(1..6);
    let chunks: Vec<SpecChunk> = (0..n_chunks)
        .map(|i| SpecChunk {
            chunk_id: make_id("CHUNK", i + 1),
            heading_path: (0..rng.gen_range(1..3)).map(|_| format!("H {}", text(rng))).collect(),
            text: text(rng),
            semantic_tags: (0..rng.gen_range(0..3)).map(|_| text(rng)).collect(),
            order_index: (i * 2 + rng.gen_range(0..2)) as u32,
        })
        .collect();
    let reqs: Vec<Requirement> = (0..rng.gen_range(1..6))
        .map(|i| Requirement {
            req_id: make_id("REQ", i + 1),
            text: text(rng),
            category: *[Category::Functional, Category::Timing, Category::Interface, Category::Safety].choose(rng).unwrap(),
            priority: *[Priority::High, Priority::Medium, Priority::Low].choose(rng).unwrap(),
            source_chunks: vec![chunks.choose(rng).unwrap().chunk_id.clone()],
        })
        .collect();
    let mut links: Vec<TraceLink> = reqs
        .iter()
        .map(|q| TraceLink {
            src_id: q.req_id.clone(),
            dst_id: q.source_chunks[0].clone(),
            link_kind: LinkKind::DerivesFrom,
        })
        .collect();

    let rtl = if rng.gen_bool(0.4) { fifo_rtl() } else { gen_design(rng, 8).verilog() };
    let dm = parse_rtl(&rtl).expect("generated rtl parses").model;
    let sigs: Vec<String> = dm.hierarchy.iter().map(|h| h.path.clone()).collect();
    let stmts: Vec<String> = dm.statements.iter().map(|s| s.id.clone()).collect();

    b.test_plan = rng.gen_bool(0.7).then(|| {
        reqs.iter()
            .map(|q| TestPlanEntry {
                req_id: q.req_id.clone(),
                observable_signals: sigs.choose_multiple(rng, 2).cloned().collect(),
                stimulus: text(rng),
                expected_response: text(rng),
                timing_constraint: some_text(rng),
            })
            .collect()
    });

    let mut line = 3;
    let props: Vec<PropertyRecord> = (0..rng.gen_range(1..8))
        .map(|i| {
            let lines = rng.gen_range(1..3);
            let n_reqs = rng.gen_range(1..=2);
            let p = PropertyRecord {
                prop_id: make_id("PROP", i + 1),
                req_ids: reqs.choose_multiple(rng, n_reqs).map(|q| q.req_id.clone()).collect(),
                kind: *[PropKind::Assertion, PropKind::Cover, PropKind::Assumption].choose(rng).unwrap(),
                sva_text: format!("P_{}: assert property (@(posedge clk) {});", i + 1, text(rng)),
                line_span: (line, line + lines - 1),
                status: if rng.gen_bool(0.9) { PropStatus::Active } else { PropStatus::Disabled },
                attempt_history: notes(rng),
            };
            line += lines;
            p
        })
        .collect();
    for p in &props {
        for q in &p.req_ids {
            links.push(TraceLink {
                src_id: p.prop_id.clone(),
                dst_id: q.clone(),
                link_kind: LinkKind::Validates,
            });
        }
    }

    let mut results = Vec::new();
    let mut cexes = Vec::new();
    for (i, p) in props.iter().enumerate() {
        if !rng.gen_bool(0.8) {
            continue;
        }
        let status = *[FormalStatus::Proven, FormalStatus::Cex, FormalStatus::Vacuous, FormalStatus::Bounded, FormalStatus::Error]
            .choose(rng)
            .unwrap();
        let result_id = make_id("RES", results.len() + 1);
        let artifact_path = (status == FormalStatus::Cex || rng.gen_bool(0.2)).then(|| format!("waveforms/{result_id}.vcd"));
        if let Some(path) = &artifact_path {
            b.files.insert(path.clone(), format!("$comment {} $end\n#0\n", text(rng)));
        }
        links.push(TraceLink {
            src_id: result_id.clone(),
            dst_id: p.prop_id.clone(),
            link_kind: status.link_kind(),
        });
        if status == FormalStatus::Cex {
            cexes.push(CexCase {
                cex_id: make_id("CEX", cexes.len() + 1),
                prop_id: p.prop_id.clone(),
                result_id: Some(result_id.clone()),
                vcd_path: artifact_path.clone().unwrap(),
                failure_time: rng.gen_range(0..100),
                failure_line: i as u32 + 3,
                attempts: notes(rng).into_iter().filter(|n| n.loop_kind == LoopKind::Cex).collect(),
                root_cause: *[None, Some(RootCause::RtlBug), Some(RootCause::OverSpecification), Some(RootCause::MissingAssumption)]
                    .choose(rng)
                    .unwrap(),
                note: some_text(rng),
            });
        }
        results.push(FormalResult {
            result_id,
            prop_id: p.prop_id.clone(),
            status,
            proof_depth: rng.gen_bool(0.7).then(|| rng.gen_range(0..40)),
            runtime: rng.gen_range(0..10_000),
            artifact_path,
            stage: ["formal", "cex-1", "coverage-2"].choose(rng).unwrap().to_string(),
            stale: rng.gen_bool(0.2),
            external: rng.gen_bool(0.1),
            message: some_text(rng),
        });
    }

    let coverage: Vec<CoverageMetrics> = (0..rng.gen_range(0..3))
        .map(|i| {
            let mut s = stmts.clone();
            s.shuffle(rng);
            let cut = rng.gen_range(0..=s.len());
            let (covered, unreachable) = (s[..cut].to_vec(), s[cut..].to_vec());
            CoverageMetrics {
                cov_id: make_id("COV", i + 1),
                run_ref: text(rng),
                reachable_pct: CoverageMetrics::percent(covered.len(), unreachable.len()),
                dead_code: unreachable
                    .iter()
                    .map(|st| DeadCode {
                        statement: st.clone(),
                        classification: if rng.gen_bool(0.5) { DeadCodeClass::Defensive } else { DeadCodeClass::Gap },
                    })
                    .collect(),
                covered_statements: covered,
                unreachable_statements: unreachable,
                vacuity_count: rng.gen_range(0..4),
                proof_core_ratio: rng.gen_bool(0.5).then(|| rng.gen_range(0.0..=100.0)),
                partial: rng.gen_bool(0.2),
                stage: text(rng),
                stale: rng.gen_bool(0.2),
            }
        })
        .collect();
    for c in &coverage {
        for p in props.iter().filter(|p| p.kind == PropKind::Cover) {
            links.push(TraceLink {
                src_id: p.prop_id.clone(),
                dst_id: c.cov_id.clone(),
                link_kind: LinkKind::Covers,
            });
        }
    }
    if let (Some(p), Some(s)) = (props.iter().find(|p| p.kind == PropKind::Cover), stmts.first()) {
        links.push(TraceLink {
            src_id: p.prop_id.clone(),
            dst_id: s.clone(),
            link_kind: LinkKind::Covers,
        });
    }

    b.spec_chunks = Some(chunks);
    b.requirements = Some(reqs);
    b.design_model = Some(dm);
    b.properties = Some(props);
    b.trace_links = Some(links);
    b.formal_results = Some(results);
    b.cex_cases = Some(cexes);
    b.coverage_metrics = (!coverage.is_empty() || rng.gen_bool(0.5)).then_some(coverage);
    b
}
