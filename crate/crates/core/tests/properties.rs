//! Property tests over the estimators, archive analytics, acquisition and
//! proposal layers.

use std::collections::HashSet;

use poise_core::acquisition::{discounted_topk_gain_at, gp_fit, AcquisitionWeights, Scorer};
use poise_core::archive::{depth_frontier, dominates, pareto_frontier, Archive, MetricKey, Sense};
use poise_core::env::MetricVector;
use poise_core::estimators::{compute_advantages, Algorithm, EstimatorConfig, RewardGroup, SampleRecord};
use poise_core::proposal::{build_context, generate_population, screen_and_rank, ContextSizes, Genome};
use poise_core::search::reflect;
use poise_core::{seed, testing};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = SampleRecord> {
    (any::<bool>(), any::<bool>(), 1u32..3000, 0.0..3.0f64).prop_map(|(valid, correct, len, h)| {
        let correct = valid && correct;
        SampleRecord::new(if correct { 1.0 } else { 0.0 }, 0.0, valid, len, h)
    })
}

fn group() -> impl Strategy<Value = RewardGroup> {
    prop::collection::vec(sample(), 2..12).prop_map(|s| RewardGroup::new("p", s))
}

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop::sample::select(vec![
        Algorithm::Grpo,
        Algorithm::Bn,
        Algorithm::Av,
        Algorithm::VmAv,
        Algorithm::Msa,
        Algorithm::Fa,
        Algorithm::Dfr,
        Algorithm::Sa,
        Algorithm::Dace,
        Algorithm::Cag,
        Algorithm::Dcbe,
    ])
}

fn scores() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(0u8..=10).prop_map(|a| a.map(|x| x as f64 * 10.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn advantages_are_finite_and_shaped(alg in algorithm(), batch in prop::collection::vec(group(), 1..5)) {
        let cfg = EstimatorConfig::for_algorithm(alg);
        let out = compute_advantages(&batch, &cfg).unwrap();
        prop_assert_eq!(out.len(), batch.len());
        for (a, g) in out.iter().zip(&batch) {
            prop_assert_eq!(a.len(), g.len());
            prop_assert!(a.is_finite());
        }
    }

    #[test]
    fn grpo_is_zero_mean_and_affine_invariant(rewards in prop::collection::vec(0.0..1.0f64, 2..16), scale in 0.1..1.0f64) {
        let mut cfg = EstimatorConfig::for_algorithm(Algorithm::Grpo);
        cfg.epsilon = 0.0;
        let a = compute_advantages(&[RewardGroup::from_binary("p", &rewards)], &cfg).unwrap();
        let mean = a[0].values.iter().sum::<f64>() / rewards.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
        let shifted: Vec<f64> = rewards.iter().map(|r| r * scale + (1.0 - scale) / 2.0).collect();
        let b = compute_advantages(&[RewardGroup::from_binary("p", &shifted)], &cfg).unwrap();
        for (x, y) in a[0].values.iter().zip(&b[0].values) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn depth_frontier_matches_brute_force(seed_value in any::<u64>(), n in 1usize..40) {
        let archive = testing::random_archive(seed_value, n);
        let tree = archive.lineage();
        let rows = depth_frontier(tree);
        let max_depth = (0..tree.len()).map(|i| tree.depth_of(i)).max().unwrap();
        prop_assert_eq!(rows.len(), max_depth + 1);
        let mut running = f64::NEG_INFINITY;
        for row in &rows {
            let at: Vec<f64> = (0..tree.len())
                .filter(|&i| tree.depth_of(i) == row.depth)
                .map(|i| tree.nodes()[i].overall)
                .collect();
            let best = at.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            running = running.max(best);
            prop_assert_eq!(row.count, at.len());
            prop_assert_eq!(row.best_at_depth, best);
            prop_assert_eq!(row.cumulative_best, running);
            prop_assert!(row.mean_top3 <= row.best_at_depth + 1e-12);
        }
        prop_assert!(rows.windows(2).all(|w| w[0].cumulative_best <= w[1].cumulative_best));
    }

    #[test]
    fn pareto_matches_quadratic_oracle(points in prop::collection::vec((scores(), 100.0..2000.0f64), 1..30)) {
        let items: Vec<MetricVector> = points.iter().map(|(s, l)| MetricVector::new(*s, *l)).collect();
        let objectives = [(MetricKey::Overall, Sense::Maximize), (MetricKey::MeanLength, Sense::Minimize)];
        let front = pareto_frontier(&items, &objectives).unwrap();
        let key = |m: &MetricVector| vec![m.overall, -m.mean_length];
        let oracle: Vec<usize> = (0..items.len())
            .filter(|&i| !(0..items.len()).any(|j| dominates(&key(&items[j]), &key(&items[i]))))
            .collect();
        prop_assert_eq!(&front, &oracle);
        for &i in &front {
            for &j in &front {
                prop_assert!(!dominates(&key(&items[i]), &key(&items[j])));
            }
        }
    }

    #[test]
    fn gain_is_bounded(seed_value in any::<u64>(), n in 1usize..40) {
        let archive = testing::random_archive(seed_value, n);
        let w = AcquisitionWeights::default();
        for i in 0..archive.len() {
            let g = discounted_topk_gain_at(archive.lineage(), i, &w);
            prop_assert!((-1.0..=1.0).contains(&g));
        }
    }

    #[test]
    fn gp_variance_is_non_negative(
        x in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 3), 1..10),
        y in prop::collection::vec(-5.0..5.0f64, 10),
        q in prop::collection::vec(-3.0..3.0f64, 3),
    ) {
        let m = gp_fit(&x, &y[..x.len()], 1e-4, 1.0).unwrap();
        for p in x.iter().chain(std::iter::once(&q)) {
            let (mean, std) = m.predict(p);
            prop_assert!(mean.is_finite());
            prop_assert!(std >= 0.0 && std * std <= m.signal_var + 1e-9);
        }
    }

    #[test]
    fn scores_ignore_node_labels(seed_value in any::<u64>(), n in 1usize..25) {
        let archive = testing::random_archive(seed_value, n);
        let rename = |id: &str| format!("renamed-{}", id.chars().rev().collect::<String>());
        let mut relabeled = Archive::new();
        for e in archive.entries() {
            let mut e = e.clone();
            e.node_id = rename(&e.node_id);
            e.parent_id = e.parent_id.as_deref().map(rename);
            relabeled.append(e).unwrap();
        }
        let w = AcquisitionWeights::default();
        let a = Scorer::new(&archive, None, &w);
        let b = Scorer::new(&relabeled, None, &w);
        for i in 0..archive.len() {
            prop_assert_eq!(a.score(i, &[]).score, b.score(i, &[]).score);
        }
        prop_assert_eq!(a.select(3), b.select(3));
    }

    #[test]
    fn context_tiers_are_disjoint_and_exploration_leaves_the_lineage(
        seed_value in any::<u64>(),
        n in 1usize..30,
        pick in any::<prop::sample::Index>(),
    ) {
        let archive = testing::random_archive(seed_value, n);
        let p = pick.index(archive.len());
        let parent = &archive.entries()[p].node_id;
        let refs = build_context(&archive, parent, &ContextSizes::default(), seed_value).unwrap();
        let all: Vec<&String> = refs.all().collect();
        let unique: HashSet<&String> = all.iter().copied().collect();
        prop_assert_eq!(unique.len(), all.len());
        prop_assert!(!unique.contains(parent));
        let path: HashSet<&str> = archive
            .lineage()
            .ancestry(p)
            .into_iter()
            .map(|i| archive.entries()[i].node_id.as_str())
            .collect();
        for id in &refs.exploratory_refs {
            prop_assert!(!path.contains(id.as_str()));
        }
    }

    #[test]
    fn screening_never_returns_archived_genomes(seed_value in any::<u64>(), n in 1usize..15, k in 1usize..8) {
        let archive = testing::random_archive(seed_value, n);
        let parent = &archive.entries()[archive.len() - 1];
        let mut candidates = generate_population(&parent.genome, &[], &archive, k, seed_value);
        candidates.push(archive.entries()[0].genome.clone());
        candidates.push(parent.genome.clone());
        let w = AcquisitionWeights::default();
        if let Ok(s) = screen_and_rank(&candidates, &archive, &parent.node_id, None, &w) {
            for c in &s.ranked {
                prop_assert!(!archive.contains_genome(&c.genome));
            }
            prop_assert!(s.rejected.len() >= 2);
        }
    }

    #[test]
    fn reflection_is_pure(seed_value in any::<u64>(), steps in 1usize..20) {
        let mut rng = seed::rng(seed_value);
        let parent = testing::entry_with_metrics("p", None, testing::random_metrics(&mut rng));
        let metrics = testing::random_metrics(&mut rng);
        let traj = testing::random_trajectory(&mut rng, steps);
        let a = reflect(Some(&parent), &metrics, &traj);
        let b = reflect(Some(&parent), &metrics, &traj);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn random_genomes_round_trip(seed_value in any::<u64>()) {
        let g = testing::random_genome(&mut seed::rng(seed_value));
        g.validate().unwrap();
        let back: Genome = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        prop_assert_eq!(back.canonical_json(), g.canonical_json());
    }
}
