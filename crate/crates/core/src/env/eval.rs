use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::PolicyState;
use super::task::{Bucket, TaskSpec};
use crate::error::{Error, Result};
use crate::seed;

/// Samples drawn per task in pass@k buckets.
pub const PASS_AT_K: i32 = 32;

/// Weighted Overall: 0.2 on the first two scores, 0.15 on the other four.
pub fn weighted_overall(scores: &[f64]) -> Result<f64> {
    if scores.len() != 6 {
        return Err(Error::invalid(format!(
            "weighted_overall needs 6 scores, got {}",
            scores.len()
        )));
    }
    Ok(Bucket::ALL
        .iter()
        .zip(scores)
        .map(|(b, s)| b.weight() * s)
        .sum())
}

/// Rounds half away from zero at one decimal. A relative nudge absorbs
/// binary representation error so that e.g. 14.055 becomes 14.1.
pub fn round1(x: f64) -> f64 {
    let scaled = x * 10.0;
    let nudged = scaled + scaled.signum() * scaled.abs().max(1.0) * 1e-12;
    nudged.round() / 10.0
}

/// Held-out evaluation result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    /// Bucket scores in `[0, 100]`, ordered as [`Bucket::ALL`].
    pub scores: [f64; 6],
    pub mean_length: f64,
    pub overall: f64,
}

impl MetricVector {
    pub fn new(scores: [f64; 6], mean_length: f64) -> Self {
        let overall = weighted_overall(&scores).unwrap();
        MetricVector {
            scores,
            mean_length,
            overall,
        }
    }

    pub fn score(&self, bucket: Bucket) -> f64 {
        self.scores[bucket.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.iter().any(|s| !(0.0..=100.0).contains(s)) {
            return Err(Error::invalid("bucket scores must lie in [0, 100]"));
        }
        if !(self.mean_length.is_finite() && self.mean_length >= 0.0) {
            return Err(Error::invalid("mean_length must be finite and non-negative"));
        }
        let expected = weighted_overall(&self.scores)?;
        if (expected - self.overall).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "overall {} does not match weighted scores {expected}",
                self.overall
            )));
        }
        Ok(())
    }
}

/// Per-sample success probability of `task` under `policy`.
pub fn success_probability(policy: &PolicyState, task: &TaskSpec) -> f64 {
    if !task.solvable {
        return 0.0;
    }
    policy.probs(task)[task.target_strategy] * (1.0 - task.format_noise)
}

/// Greedy decoding picks the highest-probability strategy, ties going to
/// the lowest index; the output is format-valid when noise is below 0.5.
pub fn greedy_correct(policy: &PolicyState, task: &TaskSpec) -> bool {
    let probs = policy.probs(task);
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    task.solvable && best == task.target_strategy && task.format_noise < 0.5
}

fn assemble(policy: &PolicyState, tasks: &[TaskSpec], task_score: impl Fn(&TaskSpec) -> f64) -> MetricVector {
    let mut sums = [0.0; 6];
    let mut counts = [0usize; 6];
    for t in tasks {
        sums[t.bucket.index()] += task_score(t);
        counts[t.bucket.index()] += 1;
    }
    let mut scores = [0.0; 6];
    for i in 0..6 {
        if counts[i] > 0 {
            scores[i] = (100.0 * sums[i] / counts[i] as f64).clamp(0.0, 100.0);
        }
    }
    let mean_length = if tasks.is_empty() {
        0.0
    } else {
        tasks.iter().map(|t| policy.expected_length(t)).sum::<f64>() / tasks.len() as f64
    };
    MetricVector::new(scores, mean_length)
}

/// Exact evaluation: pass@32 in closed form for sampled buckets, greedy
/// accuracy for the rest. Buckets without tasks score 0.
pub fn evaluate_policy(policy: &PolicyState, eval_tasks: &[TaskSpec]) -> MetricVector {
    assemble(policy, eval_tasks, |t| {
        if t.bucket.uses_pass_at_k() {
            1.0 - (1.0 - success_probability(policy, t)).powi(PASS_AT_K)
        } else if greedy_correct(policy, t) {
            1.0
        } else {
            0.0
        }
    })
}

/// Monte Carlo variant of [`evaluate_policy`] for cross-checking: each
/// pass@32 task is attempted `trials` times with 32 fresh samples.
pub fn evaluate_policy_monte_carlo(
    policy: &PolicyState,
    eval_tasks: &[TaskSpec],
    trials: usize,
    rng_seed: u64,
) -> MetricVector {
    assemble(policy, eval_tasks, |t| {
        if !t.bucket.uses_pass_at_k() {
            return if greedy_correct(policy, t) { 1.0 } else { 0.0 };
        }
        let p = success_probability(policy, t);
        let mut rng = seed::rng(seed::derive(rng_seed, &[seed::key(&t.task_id)]));
        let hits = (0..trials)
            .filter(|_| (0..PASS_AT_K).any(|_| rng.random::<f64>() < p))
            .count();
        hits as f64 / trials.max(1) as f64
    })
}
