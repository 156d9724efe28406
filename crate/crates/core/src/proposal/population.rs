use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::genome::{genome_distance, Genome};
use super::mutate::{mutate_genome, MAX_MUTATION_ATTEMPTS};
use crate::acquisition::{AcquisitionWeights, FeatureMap, GpModel};
use crate::archive::Archive;
use crate::error::{Error, Result};
use crate::seed;

/// Up to `n` mutants of `parent`, pairwise distinct and absent from the
/// archive. Candidate `k` draws from its own seeded stream; a candidate
/// that keeps colliding is dropped after bounded retries.
pub fn generate_population(
    parent: &Genome,
    pareto: &[Genome],
    archive: &Archive,
    n: usize,
    seed_value: u64,
) -> Vec<Genome> {
    let mut seen: HashSet<String> = archive.entries().iter().map(|e| e.genome.canonical_json()).collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        for attempt in 0..MAX_MUTATION_ATTEMPTS {
            let mut rng = seed::rng(seed::derive(seed_value, &[k as u64, attempt as u64]));
            let g = mutate_genome(parent, pareto, &mut rng);
            if seen.insert(g.canonical_json()) {
                out.push(g);
                break;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub genome: Genome,
    /// GP upper confidence bound of the candidate's predicted descendant
    /// gain, 0 without a model.
    pub ucb: f64,
    /// Genome distance to the nearest archived genome.
    pub novelty: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub ranked: Vec<RankedCandidate>,
    /// Descriptor and reason for every filtered candidate.
    pub rejected: Vec<(String, String)>,
}

/// Drops invalid candidates and archive duplicates, then ranks the rest by
/// UCB, breaking ties by novelty and then input order. Candidates are
/// featurized as children of `parent`.
pub fn screen_and_rank(
    candidates: &[Genome],
    archive: &Archive,
    parent: &str,
    model: Option<&GpModel>,
    weights: &AcquisitionWeights,
) -> Result<Screening> {
    let p = archive.get(parent)?;
    let map = FeatureMap::fit(archive);
    let archived: HashSet<String> = archive.entries().iter().map(|e| e.genome.canonical_json()).collect();
    let mut seen = HashSet::new();
    let mut out = Screening::default();
    let mut keyed = Vec::new();
    for (idx, g) in candidates.iter().enumerate() {
        if let Err(e) = g.validate() {
            out.rejected.push((g.descriptor.clone(), format!("infeasible: {e}")));
            continue;
        }
        let key = g.canonical_json();
        if archived.contains(&key) {
            out.rejected.push((g.descriptor.clone(), "duplicate of an archived genome".into()));
            continue;
        }
        if !seen.insert(key) {
            out.rejected.push((g.descriptor.clone(), "duplicate candidate".into()));
            continue;
        }
        let f = map.encode(g, p.metrics.overall, p.depth + 1, 1);
        let ucb = model.map_or(0.0, |m| m.ucb(&f, weights.ucb_kappa));
        let novelty = archive
            .entries()
            .iter()
            .map(|e| genome_distance(g, &e.genome))
            .fold(f64::INFINITY, f64::min);
        keyed.push((idx, RankedCandidate {
            genome: g.clone(),
            ucb,
            novelty: if novelty.is_finite() { novelty } else { 1.0 },
        }));
    }
    if keyed.is_empty() {
        return Err(Error::AllCandidatesFiltered);
    }
    keyed.sort_by(|(ia, a), (ib, b)| {
        b.ucb
            .total_cmp(&a.ucb)
            .then(b.novelty.total_cmp(&a.novelty))
            .then(ia.cmp(ib))
    });
    out.ranked = keyed.into_iter().map(|(_, c)| c).collect();
    Ok(out)
}
