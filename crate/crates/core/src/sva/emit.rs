// SPDX-License-Identifier: Apache-2.0

use super::ast::PropertyFile;

pub const HEADER: &str = "// kgfv assertion file";

/// Render `f` in canonical layout: header, macros, default clocking, then
/// properties in id order, one per line. Updates `line_map`, each
/// property's line span and text, and sorts `properties` by id.
pub fn emit_properties(f: &mut PropertyFile) -> String {
    f.properties.sort_by(|a, b| a.prop_id.cmp(&b.prop_id));
    let mut lines: Vec<String> = vec![HEADER.to_string()];
    if !f.macros.is_empty() {
        lines.push(String::new());
        for m in &f.macros {
            lines.push(format!("`define {} {}", m.name, m.body));
        }
    }
    if let Some(c) = &f.clocking {
        lines.push(String::new());
        lines.push(format!("default clocking @(posedge {c}); endclocking"));
    }
    if !f.properties.is_empty() {
        lines.push(String::new());
    }
    f.line_map.clear();
    for p in &mut f.properties {
        let text = p.render();
        let line = lines.len() as u32 + 1;
        p.lines = (line, line);
        p.text = text.clone();
        f.line_map.insert(p.prop_id.clone(), (line, line));
        lines.push(text);
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

/// A file holding the macros and clocking of `f` plus one property, for
/// checking a candidate in isolation.
pub fn isolated_wrapper(f: &PropertyFile, property_text: &str) -> String {
    let mut lines = vec![HEADER.to_string()];
    for m in &f.macros {
        lines.push(format!("`define {} {}", m.name, m.body));
    }
    if let Some(c) = &f.clocking {
        lines.push(format!("default clocking @(posedge {c}); endclocking"));
    }
    lines.push(property_text.trim().to_string());
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
