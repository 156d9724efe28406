//! The published results table, retention rounds and compression branch,
//! embedded as JSON and exposed through the archive analytics types.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::archive::{LineageNode, LineageTree, MetricKey, MetricSource, RetentionRound};
use crate::env::{weighted_overall, Bucket};
use crate::error::{Error, Result};

pub const PAPER_RESULTS_JSON: &str = include_str!("../fixtures/paper_results.json");

/// Problems per benchmark, in bucket order: AIME24, AIME25, AMC, MATH500,
/// Minerva, OlympiadBench.
pub const PROBLEM_COUNTS: [u32; 6] = [30, 30, 83, 500, 272, 675];

/// Maximum allowed gap between a stored and a recomputed Overall.
pub const OVERALL_TOLERANCE: f64 = 0.05;

/// Snaps a percentage printed at 0.1 precision back to the nearest
/// achievable `100 k / n`.
pub fn snap_to_problem_count(score: f64, n: u32) -> f64 {
    let n = f64::from(n);
    100.0 * (score * n / 100.0).round() / n
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRow {
    pub name: String,
    pub scores: [f64; 6],
    pub overall: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl FixtureRow {
    /// Scores mapped back to problem counts.
    pub fn snapped_scores(&self) -> [f64; 6] {
        let mut out = self.scores;
        for (s, n) in out.iter_mut().zip(PROBLEM_COUNTS) {
            *s = snap_to_problem_count(*s, n);
        }
        out
    }

    /// Overall recomputed from the snapped scores.
    pub fn recomputed_overall(&self) -> f64 {
        weighted_overall(&self.snapped_scores()).expect("six scores")
    }

    /// Overall recomputed from the printed scores as they are.
    pub fn raw_overall(&self) -> f64 {
        weighted_overall(&self.scores).expect("six scores")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionRow {
    pub name: String,
    pub aime24: f64,
    pub aime25: f64,
    pub amc: f64,
    pub math: f64,
    pub overall: f64,
    pub mean_length: f64,
    /// Ratio as printed, for cross-checking.
    pub length_ratio: f64,
}

impl MetricSource for CompressionRow {
    fn label(&self) -> &str {
        &self.name
    }

    fn metric(&self, key: MetricKey) -> Option<f64> {
        match key {
            MetricKey::Overall | MetricKey::Utility => Some(self.overall),
            MetricKey::MeanLength => Some(self.mean_length),
            MetricKey::LengthRatio => Some(self.length_ratio),
            MetricKey::Bucket(Bucket::HardA) => Some(self.aime24),
            MetricKey::Bucket(Bucket::HardB) => Some(self.aime25),
            MetricKey::Bucket(Bucket::Mid) => Some(self.amc),
            MetricKey::Bucket(Bucket::EasyA) => Some(self.math),
            MetricKey::Bucket(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionBranch {
    pub baseline: String,
    pub rows: Vec<CompressionRow>,
}

impl CompressionBranch {
    pub fn row(&self, name: &str) -> Result<&CompressionRow> {
        self.rows
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn baseline_row(&self) -> Result<&CompressionRow> {
        self.row(&self.baseline)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetentionFixture {
    pub rounds: Vec<RetentionRound>,
    /// Parents reported individually, in table order.
    pub parents: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperResults {
    /// Root of the main lineage chain.
    pub primary_root: String,
    pub rows: Vec<FixtureRow>,
    pub retention: RetentionFixture,
    pub compression_branch: CompressionBranch,
}

impl PaperResults {
    /// The embedded fixture, validated.
    pub fn embedded() -> Result<Self> {
        PaperResults::parse(PAPER_RESULTS_JSON)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PaperResults::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let out: PaperResults = serde_json::from_str(text)?;
        out.validate()?;
        Ok(out)
    }

    /// Unique names, known parents, and every stored Overall within
    /// [`OVERALL_TOLERANCE`] of its recomputation.
    pub fn validate(&self) -> Result<()> {
        let mut names = HashMap::new();
        for r in &self.rows {
            let fail = |message: String| Error::Fixture {
                row: r.name.clone(),
                message,
            };
            if names.insert(r.name.as_str(), ()).is_some() {
                return Err(fail("duplicate row".into()));
            }
            if r.scores.iter().chain([&r.overall]).any(|s| !(0.0..=100.0).contains(s)) {
                return Err(fail("score outside [0, 100]".into()));
            }
            let recomputed = r.recomputed_overall();
            if (recomputed - r.overall).abs() > OVERALL_TOLERANCE + 1e-9 {
                return Err(fail(format!(
                    "stored overall {} but scores give {recomputed:.3}",
                    r.overall
                )));
            }
        }
        for r in &self.rows {
            if let Some(p) = &r.parent {
                if !names.contains_key(p.as_str()) {
                    return Err(Error::Fixture {
                        row: r.name.clone(),
                        message: format!("unknown parent `{p}`"),
                    });
                }
            }
        }
        if !names.contains_key(self.primary_root.as_str()) {
            return Err(Error::Fixture {
                row: self.primary_root.clone(),
                message: "primary root is not a row".into(),
            });
        }
        self.compression_branch.baseline_row()?;
        Ok(())
    }

    pub fn row(&self, name: &str) -> Result<&FixtureRow> {
        self.rows
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Every row as a lineage node, parents inserted before children.
    pub fn lineage(&self) -> Result<LineageTree> {
        let mut children: HashMap<&str, Vec<&FixtureRow>> = HashMap::new();
        let mut queue: VecDeque<&FixtureRow> = VecDeque::new();
        for r in &self.rows {
            match &r.parent {
                Some(p) => children.entry(p.as_str()).or_default().push(r),
                None => queue.push_back(r),
            }
        }
        let mut tree = LineageTree::new();
        while let Some(r) = queue.pop_front() {
            tree.insert(LineageNode {
                id: r.name.clone(),
                parent: r.parent.clone(),
                label: r.name.clone(),
                overall: r.overall,
                utility: r.overall,
                scores: Some(r.scores),
                mean_length: r.mean_length,
            })?;
            queue.extend(children.remove(r.name.as_str()).unwrap_or_default());
        }
        if tree.len() != self.rows.len() {
            return Err(Error::invalid("fixture parent links contain a cycle"));
        }
        Ok(tree)
    }

    /// The lineage below the primary root only.
    pub fn primary_chain(&self) -> Result<LineageTree> {
        let tree = self.lineage()?;
        let i = tree.resolve(&self.primary_root)?;
        Ok(tree.component(i))
    }
}
