use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lineage::{LineageNode, LineageTree};
use super::store::ArchiveEntry;
use crate::env::{Bucket, MetricVector};
use crate::error::{Error, Result};

/// A named scalar an archive item can be compared on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKey {
    Overall,
    Utility,
    MeanLength,
    LengthRatio,
    Bucket(Bucket),
}

impl MetricKey {
    pub fn name(self) -> String {
        match self {
            MetricKey::Overall => "overall".into(),
            MetricKey::Utility => "utility".into(),
            MetricKey::MeanLength => "mean_length".into(),
            MetricKey::LengthRatio => "length_ratio".into(),
            MetricKey::Bucket(b) => b.name().into(),
        }
    }

    /// The six bucket keys in column order.
    pub fn buckets() -> [MetricKey; 6] {
        Bucket::ALL.map(MetricKey::Bucket)
    }
}

impl fmt::Display for MetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for MetricKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "overall" => Ok(MetricKey::Overall),
            "utility" => Ok(MetricKey::Utility),
            "mean_length" | "length" => Ok(MetricKey::MeanLength),
            "length_ratio" | "ratio" => Ok(MetricKey::LengthRatio),
            other => other
                .parse::<Bucket>()
                .map(MetricKey::Bucket)
                .map_err(|_| Error::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Anything that exposes named metrics.
pub trait MetricSource {
    fn label(&self) -> &str;
    fn metric(&self, key: MetricKey) -> Option<f64>;
}

impl MetricSource for LineageNode {
    fn label(&self) -> &str {
        &self.label
    }

    fn metric(&self, key: MetricKey) -> Option<f64> {
        match key {
            MetricKey::Overall => Some(self.overall),
            MetricKey::Utility => Some(self.utility),
            MetricKey::MeanLength => self.mean_length,
            MetricKey::LengthRatio => None,
            MetricKey::Bucket(b) => self.scores.map(|s| s[b.index()]),
        }
    }
}

impl MetricSource for ArchiveEntry {
    fn label(&self) -> &str {
        &self.node_id
    }

    fn metric(&self, key: MetricKey) -> Option<f64> {
        match key {
            MetricKey::Overall => Some(self.metrics.overall),
            MetricKey::Utility => Some(self.utility),
            MetricKey::MeanLength => Some(self.metrics.mean_length),
            MetricKey::LengthRatio => None,
            MetricKey::Bucket(b) => Some(self.metrics.score(b)),
        }
    }
}

impl MetricSource for MetricVector {
    fn label(&self) -> &str {
        "metrics"
    }

    fn metric(&self, key: MetricKey) -> Option<f64> {
        match key {
            MetricKey::Overall => Some(self.overall),
            MetricKey::Utility | MetricKey::LengthRatio => None,
            MetricKey::MeanLength => Some(self.mean_length),
            MetricKey::Bucket(b) => Some(self.score(b)),
        }
    }
}

/// `a` weakly dominates `b` and is strictly better somewhere. Both vectors
/// are oriented so larger is better.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

fn oriented<T: MetricSource>(item: &T, objectives: &[(MetricKey, Sense)]) -> Result<Vec<f64>> {
    objectives
        .iter()
        .map(|&(key, sense)| {
            let v = item.metric(key).ok_or_else(|| Error::MissingMetric {
                key: key.name(),
                node: item.label().to_string(),
            })?;
            Ok(match sense {
                Sense::Maximize => v,
                Sense::Minimize => -v,
            })
        })
        .collect()
}

/// Indices of the items not strictly dominated by any other item. Ties are
/// kept.
pub fn pareto_frontier<T: MetricSource>(
    items: &[T],
    objectives: &[(MetricKey, Sense)],
) -> Result<Vec<usize>> {
    if objectives.is_empty() {
        return Err(Error::invalid("pareto_frontier needs at least one objective"));
    }
    let points = items
        .iter()
        .map(|it| oriented(it, objectives))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..points.len())
        .filter(|&i| !points.iter().any(|p| dominates(p, &points[i])))
        .collect())
}

/// Non-dominated sorting: front index of every point, 0 for the frontier.
/// Points are oriented so larger is better.
pub fn front_ranks(points: &[Vec<f64>]) -> Vec<usize> {
    let mut rank = vec![usize::MAX; points.len()];
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut front = 0;
    while !remaining.is_empty() {
        let current: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        for &i in &current {
            rank[i] = front;
        }
        remaining.retain(|i| !current.contains(i));
        front += 1;
    }
    rank
}

/// Mean length of `entry` relative to `baseline`.
pub fn length_ratio<A: MetricSource, B: MetricSource>(entry: &A, baseline: &B) -> Result<f64> {
    let missing = |node: &str| Error::MissingMetric {
        key: "mean_length".into(),
        node: node.to_string(),
    };
    let base = baseline
        .metric(MetricKey::MeanLength)
        .ok_or_else(|| missing(baseline.label()))?;
    if !(base > 0.0) {
        return Err(Error::invalid(format!(
            "baseline `{}` has non-positive mean length {base}",
            baseline.label()
        )));
    }
    let len = entry
        .metric(MetricKey::MeanLength)
        .ok_or_else(|| missing(entry.label()))?;
    Ok(len / base)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub depth: usize,
    pub count: usize,
    pub best_at_depth: f64,
    pub cumulative_best: f64,
    /// Mean Overall of the best `min(3, count)` nodes at this depth.
    pub mean_top3: f64,
}

/// Per-depth Overall frontier of the tree.
pub fn depth_frontier(tree: &LineageTree) -> Vec<FrontierRow> {
    let mut by_depth: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, n) in tree.nodes().iter().enumerate() {
        by_depth.entry(tree.depth_of(i)).or_default().push(n.overall);
    }
    let mut best = f64::NEG_INFINITY;
    by_depth
        .into_iter()
        .map(|(depth, mut vals)| {
            vals.sort_by(|a, b| b.total_cmp(a));
            best = best.max(vals[0]);
            let top = vals.len().min(3);
            FrontierRow {
                depth,
                count: vals.len(),
                best_at_depth: vals[0],
                cumulative_best: best,
                mean_top3: vals[..top].iter().sum::<f64>() / top as f64,
            }
        })
        .collect()
}

/// One parent-selection round. `branch_peaks` carries externally reported
/// best-descendant scores for parents whose descendants are not in the tree.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RetentionRound {
    pub selected: Vec<String>,
    #[serde(default)]
    pub branch_peaks: BTreeMap<String, f64>,
}

impl RetentionRound {
    pub fn new(selected: Vec<String>) -> Self {
        RetentionRound {
            selected,
            branch_peaks: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentRetention {
    pub parent: String,
    pub parent_overall: f64,
    pub best_descendant: Option<String>,
    pub best_overall: Option<f64>,
    pub gain: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRetention {
    pub selected: Vec<String>,
    /// Selected parent with the highest Overall at selection time.
    pub top_selected: String,
    /// Selected parent whose branch reached the highest Overall.
    pub strongest_parent: Option<String>,
    pub strongest_peak: Option<f64>,
    pub reversal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub parents: Vec<ParentRetention>,
    pub rounds: Vec<RoundRetention>,
    pub reversals: usize,
}

/// Best strict descendant of node `i` by Overall, first in preorder on ties.
pub fn best_descendant(tree: &LineageTree, i: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (d, _) in tree.descendants(i) {
        if best.is_none_or(|b| tree.nodes()[d].overall > tree.nodes()[b].overall) {
            best = Some(d);
        }
    }
    best
}

fn parent_row(tree: &LineageTree, i: usize) -> ParentRetention {
    let node = &tree.nodes()[i];
    let best = best_descendant(tree, i).map(|b| &tree.nodes()[b]);
    ParentRetention {
        parent: node.label.clone(),
        parent_overall: node.overall,
        best_descendant: best.map(|b| b.label.clone()),
        best_overall: best.map(|b| b.overall),
        gain: best.map(|b| b.overall - node.overall),
    }
}

/// Per-parent best-descendant gains and per-round reversal analysis.
/// Parents are reported for every selected id in `rounds`, then for each
/// id in `extra_parents`, without repeats. Ids may also be labels.
pub fn parent_retention_report(
    tree: &LineageTree,
    rounds: &[RetentionRound],
    extra_parents: &[String],
) -> Result<RetentionReport> {
    let mut seen = Vec::new();
    let mut parents = Vec::new();
    for key in rounds.iter().flat_map(|r| r.selected.iter()).chain(extra_parents) {
        let i = tree.resolve(key)?;
        if !seen.contains(&i) {
            seen.push(i);
            parents.push(parent_row(tree, i));
        }
    }

    let mut out_rounds = Vec::new();
    for round in rounds {
        if round.selected.is_empty() {
            return Err(Error::invalid("retention round with no selected parents"));
        }
        let idx = round
            .selected
            .iter()
            .map(|k| tree.resolve(k))
            .collect::<Result<Vec<_>>>()?;
        let mut top = idx[0];
        for &i in &idx {
            if tree.nodes()[i].overall > tree.nodes()[top].overall {
                top = i;
            }
        }
        let mut strongest: Option<(usize, f64)> = None;
        for (&i, key) in idx.iter().zip(&round.selected) {
            let in_tree = best_descendant(tree, i).map(|b| tree.nodes()[b].overall);
            let reported = round
                .branch_peaks
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(key))
                .map(|(_, &v)| v);
            let peak = match (in_tree, reported) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
            if let Some(p) = peak {
                if strongest.is_none_or(|(_, s)| p > s) {
                    strongest = Some((i, p));
                }
            }
        }
        out_rounds.push(RoundRetention {
            selected: idx.iter().map(|&i| tree.nodes()[i].label.clone()).collect(),
            top_selected: tree.nodes()[top].label.clone(),
            strongest_parent: strongest.map(|(i, _)| tree.nodes()[i].label.clone()),
            strongest_peak: strongest.map(|(_, p)| p),
            reversal: strongest.is_some_and(|(i, _)| i != top),
        });
    }
    let reversals = out_rounds.iter().filter(|r| r.reversal).count();
    Ok(RetentionReport {
        parents,
        rounds: out_rounds,
        reversals,
    })
}
