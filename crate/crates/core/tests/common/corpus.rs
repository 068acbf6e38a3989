// SPDX-License-Identifier: Apache-2.0

//! Seeded property files with one class of naming error each, for the
//! syntax loop.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

/// Well-formed properties over the two-entry FIFO. Identifiers that a
/// mutation may target are listed alongside.
pub const BASE: &[(&str, &[&str])] = &[
    ("assert property (@(posedge clk) !(full && empty));", &["full", "empty"]),
    ("assert property (@(posedge clk) rst |=> empty);", &["rst", "empty"]),
    ("assert property (@(posedge clk) disable iff (rst) (count == 2'd2) |-> full);", &["count", "full"]),
    ("assert property (@(posedge clk) disable iff (rst) (wr_en && !full && !rd_en) |=> !empty);", &["wr_en", "rd_en"]),
    ("assert property (@(posedge clk) disable iff (rst) (rd_en && !empty && !wr_en) |=> !full);", &["rd_en", "wr_en"]),
    ("cover property (@(posedge clk) full ##1 empty);", &["full", "empty"]),
    ("assert property (@(posedge clk) disable iff (rst) empty |-> (count == 2'd0));", &["empty", "count"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// Misspelt, wrongly scoped or wrongly cased signal name.
    Name,
    /// Macro-style upper-case spelling of a signal.
    Caps,
    /// Use of a macro that was never defined.
    Macro,
}

pub struct Mutant {
    pub class: Class,
    pub file: String,
    /// Number of statements carrying a mutation.
    pub mutated: usize,
}

/// Levenshtein distance, by the textbook table.
pub fn distance(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

const KEYWORDS: &[&str] = &["assert", "assume", "cover", "property", "disable", "iff", "posedge", "negedge", "clk"];

/// A misspelling at distance one from `target` and from no other leaf.
fn typo(rng: &mut StdRng, target: &str, leaves: &[String]) -> Option<String> {
    let letters: Vec<char> = "abcdefghijklmnopqrstuvwxyz".chars().collect();
    for _ in 0..50 {
        let mut c: Vec<char> = target.chars().collect();
        let at = rng.gen_range(0..c.len());
        match rng.gen_range(0..3) {
            0 if c.len() > 2 => {
                c.remove(at);
            }
            1 => c.insert(at, *letters.choose(rng).unwrap()),
            _ => c[at] = *letters.choose(rng).unwrap(),
        }
        let s: String = c.into_iter().collect();
        let ok = s.starts_with(|ch: char| ch.is_ascii_lowercase())
            && !KEYWORDS.contains(&s.as_str())
            && !leaves.iter().any(|l| l.eq_ignore_ascii_case(&s))
            && leaves.iter().filter(|l| distance(l, &s) <= 1).count() == 1;
        if ok {
            return Some(s);
        }
    }
    None
}

fn replace_word(text: &str, from: &str, to: &str) -> String {
    let mut out = String::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        out.push_str(if word == from { to } else { word });
        word.clear();
    };
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn mutate(rng: &mut StdRng, class: Class, stmt: &str, targets: &[&str], leaves: &[String]) -> String {
    let t = *targets.choose(rng).unwrap();
    let to = match class {
        Class::Name => match rng.gen_range(0..3) {
            0 => typo(rng, t, leaves).unwrap_or_else(|| format!("top.{t}")),
            1 => format!("{}.{t}", ["top", "u_fifo", "dut"].choose(rng).unwrap()),
            _ => {
                let mut c: Vec<char> = t.chars().collect();
                c[0] = c[0].to_ascii_uppercase();
                c.into_iter().collect()
            }
        },
        Class::Caps => t.to_ascii_uppercase(),
        Class::Macro => format!("`{}", t.to_ascii_uppercase()),
    };
    replace_word(stmt, t, &to)
}

/// `per_class` files for each rule class, three or four statements each
/// with one or two mutated.
pub fn rule_corpus(rng: &mut StdRng, per_class: usize, leaves: &[String]) -> Vec<Mutant> {
    let mut out = Vec::new();
    for class in [Class::Name, Class::Caps, Class::Macro] {
        for _ in 0..per_class {
            let mut picks: Vec<&(&str, &[&str])> = BASE.iter().collect();
            picks.shuffle(rng);
            picks.truncate(rng.gen_range(3..=4));
            let mutated = rng.gen_range(1..=2);
            let lines: Vec<String> = picks
                .iter()
                .enumerate()
                .map(|(i, (s, targets))| if i < mutated { mutate(rng, class, s, targets, leaves) } else { s.to_string() })
                .collect();
            out.push(Mutant {
                class,
                file: format!("default clocking @(posedge clk); endclocking\n{}\n", lines.join("\n")),
                mutated,
            });
        }
    }
    out
}

/// Mutations no deterministic rule can repair, with the intended text.
pub const BACKEND_CASES: &[(&str, &str)] = &[
    (
        "assert property (@(posedge clk) !(full && empty);",
        "assert property (@(posedge clk) !(full && empty));",
    ),
    ("assert property (@(posedge clk) rst |=> );", "assert property (@(posedge clk) rst |=> empty);"),
    (
        "assert property (@(posedge clk) full |-> |-> !empty);",
        "assert property (@(posedge clk) full |-> !empty);",
    ),
    (
        "assert property (@(posedge clk) disable iff (rst) (count == 3'd5) |-> full);",
        "assert property (@(posedge clk) disable iff (rst) (count == 2'd2) |-> full);",
    ),
    ("assert property (@(posedge clk) overflow_flag |-> full);", "assert property (@(posedge clk) full |-> !empty);"),
    (
        "assert property (@(posedge clk) disable iff rst wr_en && !full |=> !empty);",
        "assert property (@(posedge clk) disable iff (rst) wr_en && !full && !rd_en |=> !empty);",
    ),
    ("cover property (@(posedge clk) full ##[2:1] empty);", "cover property (@(posedge clk) full ##[1:2] empty);"),
    (
        "assert property (@(posedge clk) $past(count, wr_en) == 2'd0);",
        "assert property (@(posedge clk) rst |=> $past(rst));",
    ),
    ("assert property (@(posedge clk) zzqx_state != 2'd3);", "assert property (@(posedge clk) count != 2'd3);"),
    (
        "assert property (@(posedge clk) disable iff (rst) full[3] |-> !empty);",
        "assert property (@(posedge clk) disable iff (rst) full |-> !empty);",
    ),
];
