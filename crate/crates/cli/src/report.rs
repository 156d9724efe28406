//! Report tables and their CSV/JSON rendering.

use std::collections::BTreeMap;

use anyhow::Result;
use clap::ValueEnum;
use poise_core::archive::{
    depth_frontier, front_ranks, length_ratio, parent_retention_report, FrontierRow, LineageTree, RetentionReport,
    RetentionRound,
};
use poise_core::{Archive, PaperResults};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReportKind {
    Frontier,
    Retention,
    Tradeoff,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub enum Cell {
    Text(String),
    Num { value: f64, decimals: usize, signed: bool },
    Int(u64),
    Bool(bool),
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

pub fn fixed(value: f64, decimals: usize) -> Cell {
    Cell::Num {
        value,
        decimals,
        signed: false,
    }
}

fn signed(value: f64, decimals: usize) -> Cell {
    Cell::Num {
        value,
        decimals,
        signed: true,
    }
}

fn optional(value: Option<f64>, f: fn(f64, usize) -> Cell, decimals: usize) -> Cell {
    value.map_or(Cell::Text(String::new()), |v| f(v, decimals))
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num { value, decimals, signed } => {
                let text = format!("{value:.decimals$}");
                let text = match text.strip_prefix('-') {
                    Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
                    _ => text,
                };
                if *signed && !text.starts_with('-') {
                    format!("+{text}")
                } else {
                    text
                }
            }
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) if s.is_empty() => Value::Null,
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Num { value, decimals, .. } => {
                let rounded: f64 = format!("{value:.decimals$}").parse::<f64>().unwrap_or(*value) + 0.0;
                serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
            }
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
        }
    }
}

pub struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.headers.join(",");
                out.push('\n');
                for row in &self.rows {
                    let fields: Vec<String> = row.iter().map(|c| csv_field(&c.text())).collect();
                    out.push_str(&fields.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .headers
                            .iter()
                            .zip(row)
                            .map(|(h, c)| (h.to_string(), c.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut out = serde_json::to_string_pretty(&rows).expect("table serializes");
                out.push('\n');
                out
            }
        }
    }
}

fn frontier_table(rows: &[FrontierRow]) -> Table {
    let mut t = Table::new(&["depth", "count", "best_at_depth", "cumulative_best", "mean_top3"]);
    for r in rows {
        t.push(vec![
            Cell::Int(r.depth as u64),
            Cell::Int(r.count as u64),
            fixed(r.best_at_depth, 1),
            fixed(r.cumulative_best, 1),
            fixed(r.mean_top3, 1),
        ]);
    }
    t
}

fn label(tree: &LineageTree, id: &str) -> String {
    tree.resolve(id)
        .map(|i| tree.nodes()[i].label.clone())
        .unwrap_or_else(|_| id.to_string())
}

fn retention_table(tree: &LineageTree, report: &RetentionReport) -> Table {
    let mut t = Table::new(&["parent", "parent_overall", "best_descendant", "best_overall", "gain"]);
    for r in &report.parents {
        t.push(vec![
            label(tree, &r.parent).into(),
            fixed(r.parent_overall, 1),
            r.best_descendant.as_deref().map(|d| label(tree, d)).unwrap_or_default().into(),
            optional(r.best_overall, fixed, 1),
            optional(r.gain, signed, 1),
        ]);
    }
    if !report.rounds.is_empty() {
        eprintln!(
            "{} of {} selection rounds reversed (a lower-ranked parent grew the best branch)",
            report.reversals,
            report.rounds.len()
        );
    }
    t
}

/// Overall against length ratio, with the non-dominated rows flagged.
fn tradeoff_table(ids: Option<&[String]>, names: &[String], overall: &[f64], ratios: &[f64]) -> Table {
    let points: Vec<Vec<f64>> = overall.iter().zip(ratios).map(|(o, r)| vec![*o, -r]).collect();
    let ranks = front_ranks(&points);
    let mut headers = vec!["name", "overall", "length_ratio", "frontier"];
    if ids.is_some() {
        headers.insert(0, "node_id");
    }
    let mut t = Table::new(&headers);
    for i in 0..names.len() {
        let mut row = vec![
            names[i].clone().into(),
            fixed(overall[i], 1),
            fixed(ratios[i], 3),
            Cell::Bool(ranks[i] == 0),
        ];
        if let Some(ids) = ids {
            row.insert(0, ids[i].clone().into());
        }
        t.push(row);
    }
    t
}

pub fn from_fixture(f: &PaperResults, kind: ReportKind) -> Result<Table> {
    Ok(match kind {
        ReportKind::Frontier => frontier_table(&depth_frontier(&f.primary_chain()?)),
        ReportKind::Retention => {
            let tree = f.lineage()?;
            let report = parent_retention_report(&tree, &f.retention.rounds, &f.retention.parents)?;
            retention_table(&tree, &report)
        }
        ReportKind::Tradeoff => {
            let branch = &f.compression_branch;
            let base = branch.baseline_row()?;
            let names: Vec<String> = branch.rows.iter().map(|r| r.name.clone()).collect();
            let overall: Vec<f64> = branch.rows.iter().map(|r| r.overall).collect();
            let ratios = branch
                .rows
                .iter()
                .map(|r| length_ratio(r, base))
                .collect::<poise_core::Result<Vec<_>>>()?;
            tradeoff_table(None, &names, &overall, &ratios)
        }
    })
}

/// Selection rounds reconstructed from the archive: the parents of the
/// entries created in each generation, in first-appearance order.
fn archive_rounds(a: &Archive) -> Vec<RetentionRound> {
    let mut by_gen: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for e in a.entries() {
        if let Some(p) = &e.parent_id {
            let round = by_gen.entry(e.created_at).or_default();
            if !round.contains(p) {
                round.push(p.clone());
            }
        }
    }
    by_gen.into_values().map(RetentionRound::new).collect()
}

pub fn from_archive(a: &Archive, kind: ReportKind) -> Result<Table> {
    let tree = a.lineage();
    Ok(match kind {
        ReportKind::Frontier => frontier_table(&depth_frontier(tree)),
        ReportKind::Retention => {
            let report = parent_retention_report(tree, &archive_rounds(a), &[])?;
            retention_table(tree, &report)
        }
        ReportKind::Tradeoff => {
            let Some(root) = a.root() else {
                return Ok(tradeoff_table(Some(&[]), &[], &[], &[]));
            };
            let ids: Vec<String> = a.entries().iter().map(|e| e.node_id.clone()).collect();
            let names: Vec<String> = a.entries().iter().map(|e| e.genome.descriptor.clone()).collect();
            let overall: Vec<f64> = a.entries().iter().map(|e| e.metrics.overall).collect();
            let ratios = a
                .entries()
                .iter()
                .map(|e| length_ratio(e, root))
                .collect::<poise_core::Result<Vec<_>>>()?;
            tradeoff_table(Some(&ids), &names, &overall, &ratios)
        }
    })
}
