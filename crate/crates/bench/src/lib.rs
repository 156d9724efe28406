//! Input builders shared by the criterion benches.

use poise_core::estimators::{RewardGroup, SampleRecord};
use poise_core::seed;
use rand::Rng;

/// `groups` reward groups of `g` samples with mixed validity and
/// correctness.
pub fn reward_batch(seed_value: u64, groups: usize, g: usize) -> Vec<RewardGroup> {
    let mut rng = seed::rng(seed_value);
    (0..groups)
        .map(|k| {
            let samples = (0..g)
                .map(|_| {
                    let valid = rng.random_bool(0.85);
                    let correct = valid && rng.random_bool(0.4);
                    SampleRecord::new(
                        if correct { 1.0 } else { 0.0 },
                        0.0,
                        valid,
                        rng.random_range(50..1500),
                        rng.random_range(0.0..3.0),
                    )
                })
                .collect();
            RewardGroup::new(format!("p{k}"), samples)
        })
        .collect()
}

/// `n` random points in `[0, 1]^dim` with targets in `[-1, 1]`.
pub fn gp_points(seed_value: u64, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = seed::rng(seed_value);
    let x = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    (x, y)
}
