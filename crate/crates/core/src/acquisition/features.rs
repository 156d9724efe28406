use crate::archive::Archive;
use crate::estimators::Algorithm;
use crate::proposal::{Genome, RANGES};

/// Length of the genome part of a feature vector: algorithm one-hot,
/// entropy-schedule flag and scaled numeric fields.
pub const GENOME_DIMS: usize = Algorithm::ALL.len() + 1 + RANGES.len();

/// Min-max scaling fitted over an archive. Raw columns are the numeric
/// genome fields followed by overall, depth and subtree size.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn raw(genome: &Genome, overall: f64, depth: usize, subtree: usize) -> Vec<f64> {
    let mut v: Vec<f64> = genome.numeric_values().into_iter().map(|(_, x)| x).collect();
    v.extend([overall, depth as f64, subtree as f64]);
    v
}

impl FeatureMap {
    pub fn fit(archive: &Archive) -> Self {
        let tree = archive.lineage();
        let cols = RANGES.len() + 3;
        let mut lo = vec![f64::INFINITY; cols];
        let mut hi = vec![f64::NEG_INFINITY; cols];
        for (i, e) in archive.entries().iter().enumerate() {
            let r = raw(&e.genome, e.metrics.overall, e.depth, tree.subtree_size(i));
            for (k, x) in r.into_iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        FeatureMap { lo, hi }
    }

    fn scale(&self, k: usize, x: f64) -> f64 {
        let span = self.hi[k] - self.lo[k];
        if span > 0.0 {
            ((x - self.lo[k]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn dims(&self) -> usize {
        GENOME_DIMS + 3
    }

    pub fn encode(&self, genome: &Genome, overall: f64, depth: usize, subtree: usize) -> Vec<f64> {
        let mut out = vec![0.0; Algorithm::ALL.len()];
        out[genome.algorithm().index()] = 1.0;
        out.push(if genome.trainer_overrides.entropy_schedule.is_some() { 1.0 } else { 0.0 });
        out.extend(
            raw(genome, overall, depth, subtree)
                .into_iter()
                .enumerate()
                .map(|(k, x)| self.scale(k, x)),
        );
        out
    }

    /// Feature vectors of every archive entry, in entry order.
    pub fn archive_features(&self, archive: &Archive) -> Vec<Vec<f64>> {
        let tree = archive.lineage();
        archive
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| self.encode(&e.genome, e.metrics.overall, e.depth, tree.subtree_size(i)))
            .collect()
    }
}

/// The genome part of a node feature vector.
pub fn genome_features(features: &[f64]) -> &[f64] {
    &features[..GENOME_DIMS]
}
