use serde::{Deserialize, Serialize};

use super::features::{genome_features, FeatureMap};
use super::gain::discounted_topk_gain_at;
use super::gp::{gp_fit, GpModel};
use super::AcquisitionWeights;
use crate::archive::{front_ranks, Archive};
use crate::env::Bucket;
use crate::error::Result;

/// Neighbours averaged in the diversity term.
pub const DIVERSITY_NEIGHBOURS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub node_id: String,
    pub u_pareto: f64,
    pub u_perf: f64,
    pub u_div: f64,
    pub alpha_gp: f64,
    pub score: f64,
}

/// GP fitted on every node with at least one descendant, targeting its
/// discounted top-K gain. `None` when no node has descendants yet.
pub fn fit_archive_model(archive: &Archive, w: &AcquisitionWeights) -> Result<Option<GpModel>> {
    let tree = archive.lineage();
    let map = FeatureMap::fit(archive);
    let features = map.archive_features(archive);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, f) in features.into_iter().enumerate() {
        if !tree.children_of(i).is_empty() {
            x.push(f);
            y.push(discounted_topk_gain_at(tree, i, w));
        }
    }
    if x.is_empty() {
        return Ok(None);
    }
    gp_fit(&x, &y, w.gp_noise, w.ucb_kappa).map(Some)
}

/// Per-archive precomputation for scoring and greedy selection.
pub struct Scorer<'a> {
    archive: &'a Archive,
    weights: AcquisitionWeights,
    dist: Vec<Vec<f64>>,
    max_dist: f64,
    u_pareto: Vec<f64>,
    u_perf: Vec<f64>,
    alpha: Vec<f64>,
}

impl<'a> Scorer<'a> {
    pub fn new(archive: &'a Archive, model: Option<&GpModel>, weights: &AcquisitionWeights) -> Self {
        let entries = archive.entries();
        let map = FeatureMap::fit(archive);
        let features = map.archive_features(archive);
        let n = entries.len();

        let mut dist = vec![vec![0.0; n]; n];
        let mut max_dist: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let d = genome_features(&features[i])
                    .iter()
                    .zip(genome_features(&features[j]))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                dist[i][j] = d;
                dist[j][i] = d;
                max_dist = max_dist.max(d);
            }
        }

        let points: Vec<Vec<f64>> = entries
            .iter()
            .map(|e| Bucket::ALL.iter().map(|&b| e.metrics.score(b)).collect())
            .collect();
        let u_pareto = front_ranks(&points).into_iter().map(|r| 1.0 / (1.0 + r as f64)).collect();

        let (lo, hi) = entries.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.utility), hi.max(e.utility))
        });
        let u_perf = entries
            .iter()
            .map(|e| if hi > lo { (e.utility - lo) / (hi - lo) } else { 0.5 })
            .collect();

        let alpha = features
            .iter()
            .map(|f| model.map_or(0.0, |m| m.ucb(f, weights.ucb_kappa)))
            .collect();

        Scorer {
            archive,
            weights: weights.clone(),
            dist,
            max_dist,
            u_pareto,
            u_perf,
            alpha,
        }
    }

    /// Mean distance to the nearest archived or already-selected nodes,
    /// normalized by the archive's largest pairwise distance.
    fn diversity(&self, i: usize, selected: &[usize]) -> f64 {
        if self.max_dist <= 0.0 {
            return 0.0;
        }
        let mut d: Vec<f64> = (0..self.dist.len())
            .filter(|&j| j != i)
            .chain(selected.iter().copied().filter(|&s| s != i))
            .map(|j| self.dist[i][j])
            .collect();
        if d.is_empty() {
            return 0.0;
        }
        d.sort_by(f64::total_cmp);
        let k = d.len().min(DIVERSITY_NEIGHBOURS);
        d[..k].iter().sum::<f64>() / k as f64 / self.max_dist
    }

    pub fn score(&self, i: usize, selected: &[usize]) -> ScoreBreakdown {
        let w = &self.weights;
        let u_div = self.diversity(i, selected);
        let (u_pareto, u_perf, alpha_gp) = (self.u_pareto[i], self.u_perf[i], self.alpha[i]);
        ScoreBreakdown {
            node_id: self.archive.entries()[i].node_id.clone(),
            u_pareto,
            u_perf,
            u_div,
            alpha_gp,
            score: w.w_pareto * u_pareto + w.w_perf * u_perf + w.w_div * u_div + w.w_bayes * alpha_gp,
        }
    }

    /// Greedy pick of `count` distinct nodes, recomputing diversity against
    /// the picks so far. Ties go to the earlier node.
    pub fn select(&self, count: usize) -> Vec<usize> {
        let n = self.dist.len();
        let mut picked: Vec<usize> = Vec::new();
        while picked.len() < count.min(n) {
            let mut best: Option<(usize, f64)> = None;
            for i in (0..n).filter(|i| !picked.contains(i)) {
                let s = self.score(i, &picked).score;
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
            picked.push(best.expect("candidate left").0);
        }
        picked
    }
}

pub fn score_node(
    archive: &Archive,
    node: &str,
    model: Option<&GpModel>,
    weights: &AcquisitionWeights,
) -> Result<ScoreBreakdown> {
    let i = archive.lineage().resolve(node)?;
    Ok(Scorer::new(archive, model, weights).score(i, &[]))
}

/// Node ids of the greedily selected parents.
pub fn select_parents(
    archive: &Archive,
    model: Option<&GpModel>,
    weights: &AcquisitionWeights,
    count: usize,
) -> Vec<String> {
    Scorer::new(archive, model, weights)
        .select(count)
        .into_iter()
        .map(|i| archive.entries()[i].node_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MetricVector;
    use crate::testing;

    fn perf_only() -> AcquisitionWeights {
        AcquisitionWeights {
            w_pareto: 0.0,
            w_perf: 1.0,
            w_div: 0.0,
            w_bayes: 0.0,
            ..AcquisitionWeights::default()
        }
    }

    #[test]
    fn best_overall_scores_one_under_perf_weight() {
        let a = testing::random_archive(11, 8);
        let best = a
            .entries()
            .iter()
            .max_by(|x, y| x.utility.total_cmp(&y.utility))
            .unwrap();
        let s = score_node(&a, &best.node_id, None, &perf_only()).unwrap();
        assert_eq!(s.score, 1.0);
        assert_eq!(select_parents(&a, None, &perf_only(), 1), vec![best.node_id.clone()]);
    }

    #[test]
    fn dominated_node_gets_lower_pareto_term() {
        let root = testing::entry_with_metrics("r", None, MetricVector::new([50.0; 6], 300.0));
        let child = testing::entry_with_metrics("c", Some(&root), MetricVector::new([40.0; 6], 300.0));
        let mut a = Archive::new();
        a.append(root).unwrap();
        a.append(child).unwrap();
        let s = score_node(&a, "c", None, &AcquisitionWeights::default()).unwrap();
        assert_eq!(s.u_pareto, 0.5);
    }

    #[test]
    fn select_all_returns_every_node() {
        let a = testing::random_archive(5, 6);
        let w = AcquisitionWeights::default();
        let model = fit_archive_model(&a, &w).unwrap();
        let mut ids = select_parents(&a, model.as_ref(), &w, 10);
        ids.sort();
        let mut all: Vec<String> = a.entries().iter().map(|e| e.node_id.clone()).collect();
        all.sort();
        assert_eq!(ids, all);
    }
}
