use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::genome::genome_distance;
use crate::archive::{front_ranks, Archive};
use crate::env::Bucket;
use crate::error::Result;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextSizes {
    pub pareto: usize,
    pub complementary: usize,
    pub exploratory: usize,
}

impl Default for ContextSizes {
    fn default() -> Self {
        ContextSizes {
            pareto: 3,
            complementary: 2,
            exploratory: 2,
        }
    }
}

/// Tiered reference node ids handed to the proposer. The tiers are
/// disjoint and never contain the parent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub pareto_refs: Vec<String>,
    pub complementary_refs: Vec<String>,
    pub exploratory_refs: Vec<String>,
}

impl ReferenceSet {
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.pareto_refs
            .iter()
            .chain(&self.complementary_refs)
            .chain(&self.exploratory_refs)
    }
}

/// Builds the three reference tiers for `parent`:
/// complementary refs are the nodes farthest from the parent in genome
/// space, pareto refs the remaining bucket-frontier nodes by utility, and
/// exploratory refs a seeded sample of what is left off the parent's
/// root-to-node path. Tiers are truncated when the archive is small.
pub fn build_context(archive: &Archive, parent: &str, sizes: &ContextSizes, seed_value: u64) -> Result<ReferenceSet> {
    let tree = archive.lineage();
    let p = tree.position(parent).ok_or_else(|| crate::Error::UnknownNode(parent.to_string()))?;
    let entries = archive.entries();
    let parent_genome = &entries[p].genome;
    let mut taken = vec![false; entries.len()];
    taken[p] = true;

    let mut by_distance: Vec<(usize, f64)> = (0..entries.len())
        .filter(|&i| i != p)
        .map(|i| (i, genome_distance(parent_genome, &entries[i].genome)))
        .collect();
    by_distance.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let complementary: Vec<usize> = by_distance
        .iter()
        .take(sizes.complementary)
        .map(|&(i, _)| i)
        .collect();
    complementary.iter().for_each(|&i| taken[i] = true);

    let points: Vec<Vec<f64>> = entries
        .iter()
        .map(|e| Bucket::ALL.iter().map(|&b| e.metrics.score(b)).collect())
        .collect();
    let ranks = front_ranks(&points);
    let mut frontier: Vec<usize> = (0..entries.len()).filter(|&i| ranks[i] == 0 && !taken[i]).collect();
    frontier.sort_by(|&a, &b| entries[b].utility.total_cmp(&entries[a].utility).then(a.cmp(&b)));
    frontier.truncate(sizes.pareto);
    frontier.iter().for_each(|&i| taken[i] = true);

    let lineage = tree.ancestry(p);
    let mut off_lineage: Vec<usize> = (0..entries.len())
        .filter(|i| !taken[*i] && !lineage.contains(i))
        .collect();
    off_lineage.shuffle(&mut seed::rng(seed_value));
    off_lineage.truncate(sizes.exploratory);

    let ids = |v: &[usize]| v.iter().map(|&i| entries[i].node_id.clone()).collect();
    Ok(ReferenceSet {
        pareto_refs: ids(&frontier),
        complementary_refs: ids(&complementary),
        exploratory_refs: ids(&off_lineage),
    })
}
