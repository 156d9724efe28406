//! Builders for synthetic archives and entries, shared by tests and
//! benches.

use rand::Rng;

use crate::archive::{Archive, ArchiveEntry};
use crate::env::{Bucket, EntropySchedule, MetricVector, TrajectorySummary};
use crate::estimators::{Algorithm, EstimatorConfig};
use crate::proposal::{Genome, TrainerOverrides, RANGES};
use crate::search::reflect;
use crate::seed;

/// A valid genome with every numeric field drawn inside its declared range.
pub fn random_genome<R: Rng>(rng: &mut R) -> Genome {
    let algorithm = Algorithm::ALL[rng.random_range(0..Algorithm::ALL.len())];
    let mut g = Genome::new(EstimatorConfig::for_algorithm(algorithm), TrainerOverrides::default());
    for &(name, lo, hi) in &RANGES {
        let (lo, hi) = match name {
            "clip_lo" => (lo, -0.5),
            "clip_hi" => (0.5, hi),
            "alpha_uniform" => (0.05, hi),
            _ => (lo, hi),
        };
        g.set(name, rng.random_range(lo..=hi)).unwrap();
    }
    if rng.random_bool(0.3) {
        let h_lo = rng.random_range(0.1..0.6);
        g.trainer_overrides.entropy_schedule = Some(EntropySchedule {
            h_hi: rng.random_range(h_lo..=1.0),
            h_lo,
            anneal_steps: rng.random_range(1..50),
        });
    }
    g.descriptor = g.default_descriptor();
    g
}

pub fn random_trajectory<R: Rng>(rng: &mut R, steps: usize) -> TrajectorySummary {
    let mut curve = |lo: f64, hi: f64| (0..steps).map(|_| rng.random_range(lo..hi)).collect::<Vec<_>>();
    TrajectorySummary {
        reward_curve: curve(0.0, 1.1),
        entropy_curve: curve(0.0, 3.0),
        mean_length_curve: curve(1.0, 1000.0),
        all_fail_fraction_curve: curve(0.0, 1.0),
        grad_norm_curve: curve(0.0, 2.0),
    }
}

pub fn random_metrics<R: Rng>(rng: &mut R) -> MetricVector {
    let scores = Bucket::ALL.map(|_| (rng.random_range(0.0..100.0) * 10.0_f64).round() / 10.0);
    MetricVector::new(scores, rng.random_range(50.0..1500.0))
}

/// A constant trajectory of `steps` steps.
pub fn flat_trajectory(steps: usize) -> TrajectorySummary {
    TrajectorySummary {
        reward_curve: vec![0.5; steps],
        entropy_curve: vec![1.0; steps],
        mean_length_curve: vec![300.0; steps],
        all_fail_fraction_curve: vec![0.0; steps],
        grad_norm_curve: vec![1.0; steps],
    }
}

/// A baseline GRPO entry with the given metrics, child of `parent` when
/// given. The descriptor is made unique by suffixing the node id.
pub fn entry_with_metrics(id: &str, parent: Option<&ArchiveEntry>, metrics: MetricVector) -> ArchiveEntry {
    let mut genome = Genome::baseline(Algorithm::Grpo);
    genome.descriptor = format!("{}-{id}", genome.descriptor);
    entry_with_genome(id, parent, genome, metrics)
}

pub fn entry_with_genome(
    id: &str,
    parent: Option<&ArchiveEntry>,
    genome: Genome,
    metrics: MetricVector,
) -> ArchiveEntry {
    let trajectory = flat_trajectory(4);
    let reflection = reflect(parent, &metrics, &trajectory);
    ArchiveEntry {
        node_id: id.to_string(),
        parent_id: parent.map(|p| p.node_id.clone()),
        utility: metrics.overall,
        genome,
        trajectory,
        metrics,
        reflection,
        created_at: parent.map_or(0, |p| p.created_at + 1),
        depth: parent.map_or(0, |p| p.depth + 1),
    }
}

/// A valid single-root archive of `n` random entries.
pub fn random_archive(seed_value: u64, n: usize) -> Archive {
    let mut rng = seed::rng(seed_value);
    let mut archive = Archive::new();
    for i in 0..n {
        let parent = (i > 0).then(|| archive.entries()[rng.random_range(0..i)].clone());
        let genome = random_genome(&mut rng);
        let metrics = random_metrics(&mut rng);
        let steps = rng.random_range(1..6);
        let trajectory = random_trajectory(&mut rng, steps);
        let reflection = reflect(parent.as_ref(), &metrics, &trajectory);
        let entry = ArchiveEntry {
            node_id: format!("n{i:04}"),
            parent_id: parent.as_ref().map(|p| p.node_id.clone()),
            utility: metrics.overall,
            genome,
            trajectory,
            metrics,
            reflection,
            created_at: parent.as_ref().map_or(0, |p| p.created_at + rng.random_range(1..3)),
            depth: parent.as_ref().map_or(0, |p| p.depth + 1),
        };
        archive.append(entry).expect("random entry is valid");
    }
    archive
}
