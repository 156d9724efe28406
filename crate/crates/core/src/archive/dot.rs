use std::fmt::Write;

use super::lineage::LineageTree;

/// Fill colour on a red-to-green ramp over the tree's Overall range.
fn colour(value: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo { (value - lo) / (hi - lo) } else { 0.5 };
    let r = (255.0 * (1.0 - t)).round() as u8;
    let g = (200.0 * t + 55.0).round() as u8;
    format!("#{r:02x}{g:02x}60")
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: one node per entry labelled `name (overall)`, one
/// edge per parent link.
pub fn to_dot(tree: &LineageTree) -> String {
    let nodes = tree.nodes();
    let lo = nodes.iter().map(|n| n.overall).fold(f64::INFINITY, f64::min);
    let hi = nodes.iter().map(|n| n.overall).fold(f64::NEG_INFINITY, f64::max);
    let mut out = String::from("digraph lineage {\n  rankdir=TB;\n  node [shape=box, style=filled];\n");
    for n in nodes {
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"{} ({:.1})\", fillcolor=\"{}\"];",
            escape(&n.id),
            escape(&n.label),
            n.overall,
            colour(n.overall, lo, hi)
        );
    }
    for n in nodes {
        if let Some(p) = &n.parent {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape(p), escape(&n.id));
        }
    }
    out.push_str("}\n");
    out
}
