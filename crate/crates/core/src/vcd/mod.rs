// SPDX-License-Identifier: Apache-2.0

//! Value change dump writing (from counterexample traces) and parsing into
//! a queryable waveform store.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::engine::CexTrace;
use crate::syntax::expr::mask;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Timescale {
    pub magnitude: u32,
    pub unit: String,
}

impl Default for Timescale {
    fn default() -> Self {
        Timescale {
            magnitude: 1,
            unit: "ns".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WaveSignal {
    /// Dotted hierarchical name (scopes joined with `.`).
    pub name: String,
    pub width: u32,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Change {
    pub time: u64,
    /// Binary digits, most significant first, exactly `width` long;
    /// `x`/`z` digits are kept as written.
    pub value: String,
}

impl Change {
    /// Numeric value when the digits are all `0`/`1`.
    pub fn as_u64(&self) -> Option<u64> {
        u64::from_str_radix(&self.value, 2).ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WaveDb {
    pub timescale: Option<Timescale>,
    pub signals: Vec<WaveSignal>,
    /// Per signal name, strictly increasing in time.
    pub changes: BTreeMap<String, Vec<Change>>,
    /// Directives skipped because they are not understood.
    pub warnings: usize,
}

impl WaveDb {
    pub fn signal(&self, name: &str) -> Option<&WaveSignal> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn end_time(&self) -> u64 {
        self.changes.values().filter_map(|c| c.last()).map(|c| c.time).max().unwrap_or(0)
    }

    /// Value of `name` in effect at time `t`.
    pub fn value_at(&self, name: &str, t: u64) -> Option<&str> {
        let ch = self.changes.get(name)?;
        let i = ch.partition_point(|c| c.time <= t);
        (i > 0).then(|| ch[i - 1].value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VcdError {
    #[error("signal {name}: value {value} does not fit in {width} bits")]
    Overflow { name: String, value: u64, width: u32 },
    #[error("byte {offset}: malformed $var declaration: {message}")]
    MalformedVar { offset: usize, message: String },
    #[error("byte {offset}: timestamp #{time} is not after #{previous}")]
    NonMonotonic { offset: usize, time: u64, previous: u64 },
    #[error("byte {offset}: value '{value}' is wider than {width} bits")]
    TooWide { offset: usize, value: String, width: u32 },
    #[error("byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

/// Identifier codes: printable ASCII from `!`, base 94.
fn code_for(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (i % 94) as u8) as char);
        i /= 94;
        if i == 0 {
            break;
        }
        i -= 1;
    }
    s
}

fn bits(v: u64, width: u32) -> String {
    format!("{v:0w$b}", w = width as usize)
}

fn change_record(out: &mut String, width: u32, v: u64, code: &str) {
    if width == 1 {
        let _ = writeln!(out, "{v}{code}");
    } else {
        let _ = writeln!(out, "b{} {code}", bits(v, width));
    }
}

/// Render a trace as VCD text: one timestamp per cycle, the full value set
/// at `#0`, then only values that differ from the previous cycle.
pub fn write_vcd(trace: &CexTrace, ts: &Timescale) -> Result<String, VcdError> {
    for c in &trace.cycles {
        for ((name, w), v) in trace.signals.iter().zip(&c.values) {
            if *v & !mask(*w) != 0 {
                return Err(VcdError::Overflow {
                    name: name.clone(),
                    value: *v,
                    width: *w,
                });
            }
        }
    }
    let mut out = String::new();
    out.push_str("$version kgfv $end\n");
    let _ = writeln!(out, "$comment property {} failure cycle {} $end", trace.prop_id, trace.failure_cycle);
    let _ = writeln!(out, "$timescale {}{} $end", ts.magnitude, ts.unit);

    // group declarations into a scope tree, keeping signal order within a scope
    let codes: Vec<String> = (0..trace.signals.len()).map(code_for).collect();
    let mut order: Vec<usize> = (0..trace.signals.len()).collect();
    let scope_of = |i: usize| -> Vec<&str> {
        let parts: Vec<&str> = trace.signals[i].0.split('.').collect();
        parts[..parts.len() - 1].to_vec()
    };
    order.sort_by(|&a, &b| scope_of(a).cmp(&scope_of(b)).then(a.cmp(&b)));
    let mut open: Vec<&str> = Vec::new();
    for &i in &order {
        let scope = scope_of(i);
        let common = open.iter().zip(&scope).take_while(|(a, b)| a == b).count();
        for _ in common..open.len() {
            out.push_str("$upscope $end\n");
        }
        open.truncate(common);
        for s in &scope[common..] {
            let _ = writeln!(out, "$scope module {s} $end");
            open.push(s);
        }
        let (name, w) = &trace.signals[i];
        let leaf = name.rsplit('.').next().unwrap_or(name);
        let _ = writeln!(out, "$var wire {w} {} {leaf} $end", codes[i]);
    }
    for _ in 0..open.len() {
        out.push_str("$upscope $end\n");
    }
    out.push_str("$enddefinitions $end\n");

    let mut prev: Option<&Vec<u64>> = None;
    for (t, c) in trace.cycles.iter().enumerate() {
        let _ = writeln!(out, "#{t}");
        match prev {
            None => {
                out.push_str("$dumpvars\n");
                for (j, (_, w)) in trace.signals.iter().enumerate() {
                    change_record(&mut out, *w, c.values[j], &codes[j]);
                }
                out.push_str("$end\n");
            }
            Some(p) => {
                for (j, (_, w)) in trace.signals.iter().enumerate() {
                    if p[j] != c.values[j] {
                        change_record(&mut out, *w, c.values[j], &codes[j]);
                    }
                }
            }
        }
        prev = Some(&c.values);
    }
    Ok(out)
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    /// Next whitespace-separated token and its byte offset.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        let b = self.text.as_bytes();
        while self.pos < b.len() && b[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= b.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < b.len() && !b[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some((start, &self.text[start..self.pos]))
    }

    /// Tokens up to the closing `$end`.
    fn until_end(&mut self, at: usize) -> Result<Vec<&'a str>, VcdError> {
        let mut out = Vec::new();
        loop {
            match self.next() {
                Some((_, "$end")) => return Ok(out),
                Some((_, t)) => out.push(t),
                None => {
                    return Err(VcdError::Syntax {
                        offset: at,
                        message: "directive not closed by $end".into(),
                    })
                }
            }
        }
    }
}

fn normalize(value: &str, width: u32, offset: usize) -> Result<String, VcdError> {
    let v = value.to_ascii_lowercase();
    if v.is_empty() || !v.bytes().all(|c| matches!(c, b'0' | b'1' | b'x' | b'z')) {
        return Err(VcdError::Syntax {
            offset,
            message: format!("bad value '{value}'"),
        });
    }
    let w = width as usize;
    if v.len() > w {
        return Err(VcdError::TooWide {
            offset,
            value: value.to_string(),
            width,
        });
    }
    // left-extend: x and z extend themselves, 1 extends with 0
    let fill = match v.as_bytes()[0] {
        b'x' => 'x',
        b'z' => 'z',
        _ => '0',
    };
    let mut s: String = std::iter::repeat_n(fill, w - v.len()).collect();
    s.push_str(&v);
    Ok(s)
}

/// Parse VCD text. Unknown `$` directives are skipped and counted in
/// [`WaveDb::warnings`]; `$comment`, `$date` and `$version` are skipped
/// silently.
pub fn parse_vcd(bytes: &[u8]) -> Result<WaveDb, VcdError> {
    let text = std::str::from_utf8(bytes).map_err(|e| VcdError::Syntax {
        offset: e.valid_up_to(),
        message: "not UTF-8".into(),
    })?;
    let mut lx = Lexer { text, pos: 0 };
    let mut db = WaveDb::default();
    let mut scopes: Vec<String> = Vec::new();
    let mut by_code: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut time: Option<u64> = None;
    let mut in_defs = true;

    fn record(
        db: &mut WaveDb,
        by_code: &BTreeMap<String, Vec<usize>>,
        code: &str,
        value: &str,
        at: usize,
        time: Option<u64>,
    ) -> Result<(), VcdError> {
        let ids = by_code.get(code).ok_or_else(|| VcdError::Syntax {
            offset: at,
            message: format!("unknown identifier code '{code}'"),
        })?;
        let t = time.unwrap_or(0);
        for &i in ids {
            let sig = &db.signals[i];
            let v = normalize(value, sig.width, at)?;
            let list = db.changes.entry(sig.name.clone()).or_default();
            match list.last_mut() {
                Some(last) if last.time == t => last.value = v,
                _ => list.push(Change { time: t, value: v }),
            }
        }
        Ok(())
    }

    while let Some((at, tok)) = lx.next() {
        match tok {
            "$comment" | "$date" | "$version" => {
                lx.until_end(at)?;
            }
            "$timescale" => {
                let parts = lx.until_end(at)?.concat();
                let split = parts.find(|c: char| !c.is_ascii_digit()).unwrap_or(parts.len());
                let magnitude = parts[..split].parse().map_err(|_| VcdError::Syntax {
                    offset: at,
                    message: format!("bad timescale '{parts}'"),
                })?;
                db.timescale = Some(Timescale {
                    magnitude,
                    unit: parts[split..].to_string(),
                });
            }
            "$scope" => {
                let body = lx.until_end(at)?;
                let name = body.get(1).or(body.first()).ok_or_else(|| VcdError::Syntax {
                    offset: at,
                    message: "$scope without a name".into(),
                })?;
                scopes.push(name.to_string());
            }
            "$upscope" => {
                lx.until_end(at)?;
                scopes.pop();
            }
            "$var" => {
                let body = lx.until_end(at).map_err(|_| VcdError::MalformedVar {
                    offset: at,
                    message: "missing $end".into(),
                })?;
                if body.len() < 4 {
                    return Err(VcdError::MalformedVar {
                        offset: at,
                        message: format!("expected 'type width code name', got {} fields", body.len()),
                    });
                }
                let width: u32 = match body[1].parse() {
                    Ok(w) if w > 0 => w,
                    _ => {
                        return Err(VcdError::MalformedVar {
                            offset: at,
                            message: format!("bad width '{}'", body[1]),
                        })
                    }
                };
                let mut name = scopes.clone();
                name.push(body[3].to_string());
                let name = name.join(".");
                if db.signal(&name).is_some() {
                    return Err(VcdError::MalformedVar {
                        offset: at,
                        message: format!("'{name}' declared twice"),
                    });
                }
                by_code.entry(body[2].to_string()).or_default().push(db.signals.len());
                db.signals.push(WaveSignal {
                    name,
                    width,
                    code: body[2].to_string(),
                });
            }
            "$enddefinitions" => {
                lx.until_end(at)?;
                in_defs = false;
            }
            "$dumpvars" | "$dumpall" | "$dumpon" | "$dumpoff" | "$end" => {}
            t if t.starts_with('#') => {
                let v: u64 = t[1..].parse().map_err(|_| VcdError::Syntax {
                    offset: at,
                    message: format!("bad timestamp '{t}'"),
                })?;
                if let Some(p) = time {
                    if v <= p {
                        return Err(VcdError::NonMonotonic {
                            offset: at,
                            time: v,
                            previous: p,
                        });
                    }
                }
                time = Some(v);
            }
            t if t.starts_with('$') => {
                lx.until_end(at)?;
                db.warnings += 1;
            }
            t if in_defs => {
                return Err(VcdError::Syntax {
                    offset: at,
                    message: format!("unexpected '{t}' in declarations"),
                })
            }
            t if t.starts_with(['b', 'B']) => {
                let (_, code) = lx.next().ok_or_else(|| VcdError::Syntax {
                    offset: at,
                    message: "vector change without identifier code".into(),
                })?;
                record(&mut db, &by_code, code, &t[1..], at, time)?;
            }
            t if t.starts_with(['r', 'R']) => {
                // real-valued changes are outside the two-valued model
                lx.next();
                db.warnings += 1;
            }
            t => {
                let (v, code) = t.split_at(1);
                if code.is_empty() {
                    return Err(VcdError::Syntax {
                        offset: at,
                        message: format!("scalar change '{t}' without identifier code"),
                    });
                }
                record(&mut db, &by_code, code, v, at, time)?;
            }
        }
    }
    Ok(db)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowEntry {
    pub time: u64,
    pub signal: String,
    /// `None` for a signal's first recorded value.
    pub old: Option<String>,
    pub new: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowSummary {
    pub center_time: u64,
    /// Sorted by (time, signal).
    pub window: Vec<WindowEntry>,
    pub signals_of_interest: Vec<String>,
    /// Requested names the dump does not contain.
    pub missing: Vec<String>,
}

/// Changes of `signals` within `[t - pre, t]` (timestamp units).
pub fn failure_window(db: &WaveDb, t: u64, signals: &[String], pre: u64) -> WindowSummary {
    let lo = t.saturating_sub(pre);
    let mut window = Vec::new();
    let mut present = Vec::new();
    let mut missing = Vec::new();
    for name in signals {
        if db.signal(name).is_none() {
            missing.push(name.clone());
            continue;
        }
        present.push(name.clone());
        let ch = db.changes.get(name).map(Vec::as_slice).unwrap_or(&[]);
        for (i, c) in ch.iter().enumerate() {
            if c.time >= lo && c.time <= t {
                window.push(WindowEntry {
                    time: c.time,
                    signal: name.clone(),
                    old: i.checked_sub(1).map(|j| ch[j].value.clone()),
                    new: c.value.clone(),
                });
            }
        }
    }
    window.sort_by(|a, b| (a.time, &a.signal).cmp(&(b.time, &b.signal)));
    WindowSummary {
        center_time: t,
        window,
        signals_of_interest: present,
        missing,
    }
}
