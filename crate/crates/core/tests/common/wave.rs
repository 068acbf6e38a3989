// SPDX-License-Identifier: Apache-2.0

//! Random traces and the change sets a dump of them must contain.

use std::collections::BTreeMap;

use kgfv_core::engine::{CexTrace, TraceCycle};
use rand::rngs::StdRng;
use rand::Rng;

use super::design::mask;

pub fn gen_trace(rng: &mut StdRng) -> CexTrace {
    let n = rng.gen_range(1..12);
    let mut signals = Vec::new();
    for i in 0..n {
        let depth = rng.gen_range(0..3);
        let mut parts = vec!["top".to_string()];
        for d in 0..depth {
            parts.push(format!("u{}", (i + d) % 3));
        }
        parts.push(format!("s{i}"));
        let w = *[1u32, 1, 2, 3, 8, 16, 33, 64].get(rng.gen_range(0..8)).unwrap();
        signals.push((parts.join("."), w));
    }
    let len = rng.gen_range(1..40);
    let mut cycles: Vec<TraceCycle> = Vec::new();
    for c in 0..len {
        let values = signals
            .iter()
            .enumerate()
            .map(|(j, (_, w))| {
                let keep = c > 0 && rng.gen_bool(0.6);
                if keep {
                    cycles[c - 1].values[j]
                } else {
                    rng.gen::<u64>() & mask(*w)
                }
            })
            .collect();
        cycles.push(TraceCycle {
            inputs: vec![],
            state: vec![],
            values,
        });
    }
    CexTrace {
        prop_id: format!("PROP-{:03}", rng.gen_range(1..100)),
        signals,
        failure_cycle: len - 1,
        cycles,
        violated_at_line: rng.gen_range(1..50),
    }
}

/// Per signal, the (cycle, value) pairs where the value is first seen or
/// differs from the previous cycle.
pub fn expected_changes(t: &CexTrace) -> BTreeMap<String, Vec<(u64, u64)>> {
    let mut out = BTreeMap::new();
    for (j, (name, _)) in t.signals.iter().enumerate() {
        let mut v: Vec<(u64, u64)> = Vec::new();
        for (c, cyc) in t.cycles.iter().enumerate() {
            if v.last().is_none_or(|l| l.1 != cyc.values[j]) {
                v.push((c as u64, cyc.values[j]));
            }
        }
        out.insert(name.clone(), v);
    }
    out
}

/// One expected window row: (time, signal, old, new) with values as numbers.
pub type Row = (u64, String, Option<u64>, u64);

pub fn expected_window(changes: &BTreeMap<String, Vec<(u64, u64)>>, t: u64, pre: u64, names: &[String]) -> Vec<Row> {
    let mut rows = Vec::new();
    for name in names {
        let Some(ch) = changes.get(name) else { continue };
        let mut old = None;
        for &(time, v) in ch {
            if time + pre >= t && time <= t {
                rows.push((time, name.clone(), old, v));
            }
            old = Some(v);
        }
    }
    rows.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    rows
}
