// SPDX-License-Identifier: Apache-2.0

use serde_json::json;

use super::graph::Graph;

const TEMPLATE: &str = r##"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>__TITLE__</title>
<style>
body { font-family: sans-serif; margin: 0; display: flex; height: 100vh; }
#view { flex: 1; overflow: auto; }
#side { width: 320px; border-left: 1px solid #ccc; padding: 8px; overflow: auto; font-size: 12px; }
pre { white-space: pre-wrap; word-break: break-all; }
circle { stroke: #333; stroke-width: 1; cursor: pointer; }
line { stroke: #bbb; }
line.hot { stroke: #d33; stroke-width: 2; }
text { font-size: 9px; pointer-events: none; }
.stale { opacity: 0.35; }
</style>
</head>
<body>
<div id="view"><svg id="svg"></svg></div>
<div id="side"><b>__TITLE__</b><p>__COUNTS__</p><div id="legend"></div><pre id="info">click a node</pre></div>
<script>
const DATA = __DATA__;
const COLORS = {spec_chunk:"#8dd3c7", requirement:"#ffffb3", property:"#bebada", formal_result:"#fb8072",
  cex_case:"#ff5555", coverage:"#80b1d3", module:"#fdb462", signal:"#b3de69", statement:"#fccde5"};
const NS = "http://www.w3.org/2000/svg";
const svg = document.getElementById("svg");
const types = [...new Set(DATA.nodes.map(n => n.type))];
const pos = {};
const colW = 180, rowH = 22;
let maxRows = 0;
types.forEach((t, c) => {
  const ns = DATA.nodes.filter(n => n.type === t);
  maxRows = Math.max(maxRows, ns.length);
  ns.forEach((n, r) => { pos[n.id] = [40 + c * colW, 30 + r * rowH]; });
});
svg.setAttribute("width", 80 + types.length * colW);
svg.setAttribute("height", 60 + maxRows * rowH);
const lines = DATA.edges.map(e => {
  const l = document.createElementNS(NS, "line");
  const [x1, y1] = pos[e.src], [x2, y2] = pos[e.dst];
  l.setAttribute("x1", x1); l.setAttribute("y1", y1); l.setAttribute("x2", x2); l.setAttribute("y2", y2);
  l.dataset.src = e.src; l.dataset.dst = e.dst;
  const t = document.createElementNS(NS, "title"); t.textContent = e.type; l.appendChild(t);
  svg.appendChild(l);
  return l;
});
DATA.nodes.forEach(n => {
  const [x, y] = pos[n.id];
  const c = document.createElementNS(NS, "circle");
  c.setAttribute("cx", x); c.setAttribute("cy", y); c.setAttribute("r", 6);
  c.setAttribute("fill", COLORS[n.type] || "#ddd");
  if (n.stale) c.classList.add("stale");
  c.addEventListener("click", () => {
    lines.forEach(l => l.classList.toggle("hot", l.dataset.src === n.id || l.dataset.dst === n.id));
    document.getElementById("info").textContent = n.id + " (" + n.type + ")\n" + JSON.stringify(n.attributes, null, 1);
  });
  svg.appendChild(c);
  const label = document.createElementNS(NS, "text");
  label.setAttribute("x", x + 9); label.setAttribute("y", y + 3); label.textContent = n.id;
  svg.appendChild(label);
});
document.getElementById("legend").innerHTML = types.map(t =>
  '<span style="background:' + (COLORS[t] || "#ddd") + ';padding:0 4px;margin:2px;display:inline-block">' + t + '</span>').join("");
</script>
</body>
</html>
"##;

/// Self-contained HTML page drawing the graph: one column per node type,
/// type-coloured nodes, click to highlight incident edges.
pub fn render_html(g: &Graph, title: &str) -> String {
    let data = json!({
        "nodes": g.nodes().iter().map(|n| json!({
            "id": n.id, "type": n.kind, "stale": n.stale, "attributes": n.attributes,
        })).collect::<Vec<_>>(),
        "edges": g.edges().iter().map(|e| json!({"src": e.src, "dst": e.dst, "type": e.kind})).collect::<Vec<_>>(),
    });
    // keep `</script>` inside attribute text from closing the script element
    let data = data.to_string().replace("</", "<\\/");
    let title = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    TEMPLATE
        .replace("__TITLE__", &title)
        .replace("__COUNTS__", &format!("{} nodes, {} edges", g.node_count(), g.edge_count()))
        .replace("__DATA__", &data)
}
