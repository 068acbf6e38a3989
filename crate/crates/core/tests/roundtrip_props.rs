// SPDX-License-Identifier: Apache-2.0

//! Shrinking property tests for the text formats.

mod common;

use kgfv_core::engine::{CexTrace, TraceCycle};
use kgfv_core::ir::CoverageMetrics;
use kgfv_core::vcd::{parse_vcd, write_vcd, Timescale};
use proptest::prelude::*;

fn trace() -> impl Strategy<Value = CexTrace> {
    let widths = prop::collection::vec(prop::sample::select(vec![1u32, 2, 5, 32, 64]), 1..5);
    widths
        .prop_flat_map(|ws| {
            let row: Vec<_> = ws.iter().map(|&w| any::<u64>().prop_map(move |v| v & common::design::mask(w))).collect();
            (Just(ws), prop::collection::vec(row, 1..20))
        })
        .prop_map(|(ws, rows)| CexTrace {
            prop_id: "PROP-001".into(),
            signals: ws.iter().enumerate().map(|(i, w)| (format!("dut.s{i}"), *w)).collect(),
            failure_cycle: rows.len() - 1,
            cycles: rows
                .into_iter()
                .map(|values| TraceCycle {
                    inputs: vec![],
                    state: vec![],
                    values,
                })
                .collect(),
            violated_at_line: 1,
        })
}

proptest! {
    #[test]
    fn vcd_keeps_every_change(t in trace()) {
        let text = write_vcd(&t, &Timescale::default()).unwrap();
        let db = parse_vcd(text.as_bytes()).unwrap();
        let got: std::collections::BTreeMap<String, Vec<(u64, u64)>> = db
            .changes
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|c| (c.time, c.as_u64().unwrap())).collect()))
            .collect();
        prop_assert_eq!(got, common::wave::expected_changes(&t));
    }

    #[test]
    fn percent_is_bounded_and_exact(c in 0usize..10_000, u in 0usize..10_000) {
        let p = CoverageMetrics::percent(c, u);
        prop_assert!((0.0..=100.0).contains(&p));
        if c + u > 0 {
            prop_assert!((p - 100.0 * c as f64 / (c + u) as f64).abs() < 1e-9);
        }
    }
}
