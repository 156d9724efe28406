use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lineage::{LineageNode, LineageTree};
use crate::env::{MetricVector, TrajectorySummary};
use crate::error::{Error, Result};
use crate::proposal::Genome;
use crate::search::Reflection;

/// One evaluated candidate and its place in the lineage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub node_id: String,
    pub parent_id: Option<String>,
    pub genome: Genome,
    pub trajectory: TrajectorySummary,
    pub metrics: MetricVector,
    pub reflection: Reflection,
    /// Generation index at which the entry was created.
    pub created_at: u64,
    pub depth: usize,
    /// Scalar utility used for selection; equals `metrics.overall` when no
    /// constraint is active.
    pub utility: f64,
}

impl ArchiveEntry {
    /// Checks that depend on the entry alone.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::EntryInvariant {
            node: self.node_id.clone(),
            reason,
        };
        if self.node_id.trim().is_empty() {
            return Err(fail("empty node id".into()));
        }
        self.genome.validate().map_err(|e| fail(format!("genome: {e}")))?;
        self.metrics.validate().map_err(|e| fail(format!("metrics: {e}")))?;
        self.trajectory
            .validate()
            .map_err(|e| fail(format!("trajectory: {e}")))?;
        if !self.utility.is_finite() {
            return Err(fail("utility is not finite".into()));
        }
        if self.parent_id.is_none() != (self.depth == 0) {
            return Err(fail(format!(
                "depth {} inconsistent with parent {:?}",
                self.depth, self.parent_id
            )));
        }
        Ok(())
    }

    pub fn lineage_node(&self) -> LineageNode {
        LineageNode {
            id: self.node_id.clone(),
            parent: self.parent_id.clone(),
            label: self.genome.descriptor.clone(),
            overall: self.metrics.overall,
            utility: self.utility,
            scores: Some(self.metrics.scores),
            mean_length: Some(self.metrics.mean_length),
        }
    }
}

/// Append-only genealogical archive with a single root.
#[derive(Clone, Debug, Default)]
pub struct Archive {
    entries: Vec<ArchiveEntry>,
    tree: LineageTree,
    descriptors: HashSet<String>,
}

impl PartialEq for Archive {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Archive {
    pub fn new() -> Self {
        Archive::default()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn root(&self) -> Option<&ArchiveEntry> {
        self.entries.first()
    }

    pub fn get(&self, id: &str) -> Result<&ArchiveEntry> {
        self.tree
            .position(id)
            .map(|i| &self.entries[i])
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// Lineage view; node `i` corresponds to `entries()[i]`.
    pub fn lineage(&self) -> &LineageTree {
        &self.tree
    }

    /// Validates `entry` against the archive and appends it. On error the
    /// archive is unchanged.
    pub fn append(&mut self, entry: ArchiveEntry) -> Result<()> {
        entry.validate()?;
        let fail = |reason: String| Error::EntryInvariant {
            node: entry.node_id.clone(),
            reason,
        };
        if self.tree.position(&entry.node_id).is_some() {
            return Err(Error::DuplicateNode(entry.node_id));
        }
        match &entry.parent_id {
            None if !self.entries.is_empty() => {
                return Err(fail("archive already has a root".into()));
            }
            None => {}
            Some(p) => {
                let parent = self.get(p).map_err(|_| Error::DanglingParent {
                    node: entry.node_id.clone(),
                    parent: p.clone(),
                })?;
                if entry.depth != parent.depth + 1 {
                    return Err(fail(format!(
                        "depth {} but parent `{p}` has depth {}",
                        entry.depth, parent.depth
                    )));
                }
                if entry.created_at < parent.created_at {
                    return Err(fail(format!("created before its parent `{p}`")));
                }
            }
        }
        if self.descriptors.contains(&entry.genome.descriptor) {
            return Err(fail(format!(
                "descriptor `{}` already in archive",
                entry.genome.descriptor
            )));
        }
        self.tree.insert(entry.lineage_node())?;
        self.descriptors.insert(entry.genome.descriptor.clone());
        self.entries.push(entry);
        Ok(())
    }

    /// True when some entry has the same genome content.
    pub fn contains_genome(&self, genome: &Genome) -> bool {
        let key = genome.canonical_json();
        self.entries.iter().any(|e| e.genome.canonical_json() == key)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses JSONL text; errors name the 1-based line.
    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let mut archive = Archive::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let entry: ArchiveEntry =
                serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            archive.append(entry).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(archive)
    }

    /// Writes the whole archive, replacing `path` atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("jsonl.tmp");
        fs::write(&tmp, self.to_jsonl()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Archive::from_jsonl(&text, path)
    }

    /// Appends one already-accepted entry as a line at the end of `path`.
    pub fn append_line(path: &Path, entry: &ArchiveEntry) -> Result<()> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
