use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::policy::{apply_gradient, group_gradient, project_entropy, sample_group, GroupGradient, PolicyState};
use super::task::TaskSpec;
use crate::error::{Error, Result};
use crate::estimators::{compute_advantages, RewardGroup};
use crate::proposal::Genome;
use crate::seed;

/// Entropies within this distance of the scheduled target are left alone.
pub const ENTROPY_DEADBAND: f64 = 0.1;

/// Linearly annealed entropy target. `h_hi` and `h_lo` are fractions of the
/// maximum entropy `ln(n_strategies)` of each skill.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySchedule {
    pub h_hi: f64,
    pub h_lo: f64,
    pub anneal_steps: u64,
}

impl EntropySchedule {
    /// Target entropy in nats at `step` for a skill with `n` strategies.
    pub fn target(&self, step: u64, n: usize) -> f64 {
        let frac = (step as f64 / self.anneal_steps.max(1) as f64).min(1.0);
        (self.h_hi + (self.h_lo - self.h_hi) * frac) * (n as f64).ln()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_lo > 0.0 && self.h_lo <= self.h_hi && self.h_hi <= 1.0) {
            return Err(Error::config(
                "entropy_schedule",
                "requires 0 < h_lo <= h_hi <= 1",
            ));
        }
        if self.anneal_steps == 0 {
            return Err(Error::config("entropy_schedule", "anneal_steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    /// Step size of the verbosity update for length-shaping estimators.
    pub length_learning_rate: f64,
    pub group_size: usize,
    pub steps: u64,
    pub beta_kl: f64,
    pub entropy_coeff: f64,
    pub entropy_target_schedule: Option<EntropySchedule>,
    /// Reward added to every format-valid sample.
    pub format_reward: f64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            learning_rate: 0.25,
            length_learning_rate: 0.02,
            group_size: 8,
            steps: 30,
            beta_kl: 0.01,
            entropy_coeff: 0.0,
            entropy_target_schedule: None,
            format_reward: 0.1,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.length_learning_rate >= 0.0 && self.length_learning_rate.is_finite()) {
            return Err(Error::config("length_learning_rate", "must be non-negative"));
        }
        if self.group_size < 2 {
            return Err(Error::config("group_size", "must be at least 2"));
        }
        if self.steps < 1 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if !(self.beta_kl >= 0.0 && self.beta_kl.is_finite()) {
            return Err(Error::config("beta_kl", "must be non-negative"));
        }
        if !self.entropy_coeff.is_finite() {
            return Err(Error::config("entropy_coeff", "must be finite"));
        }
        if !(self.format_reward >= 0.0 && self.format_reward.is_finite()) {
            return Err(Error::config("format_reward", "must be non-negative"));
        }
        if let Some(s) = &self.entropy_target_schedule {
            s.validate()?;
        }
        Ok(())
    }
}

/// Per-step training curves.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    /// Mean total reward of the sampled responses.
    pub reward_curve: Vec<f64>,
    /// Mean policy entropy over skills, measured before the step's update.
    pub entropy_curve: Vec<f64>,
    pub mean_length_curve: Vec<f64>,
    pub all_fail_fraction_curve: Vec<f64>,
    /// Norm of the full parameter step direction.
    pub grad_norm_curve: Vec<f64>,
}

impl TrajectorySummary {
    pub fn len(&self) -> usize {
        self.reward_curve.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward_curve.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.reward_curve.len();
        let curves = [
            ("entropy_curve", &self.entropy_curve),
            ("mean_length_curve", &self.mean_length_curve),
            ("all_fail_fraction_curve", &self.all_fail_fraction_curve),
            ("grad_norm_curve", &self.grad_norm_curve),
        ];
        for (name, c) in curves {
            if c.len() != n {
                return Err(Error::invalid(format!(
                    "{name} has {} points, reward_curve has {n}",
                    c.len()
                )));
            }
        }
        let all = curves.iter().flat_map(|(_, c)| c.iter()).chain(&self.reward_curve);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "trajectory".into(),
            });
        }
        Ok(())
    }
}

/// Fixed-step training of a uniform initial policy with the genome's
/// estimator. Deterministic in `(genome, tasks, cfg.seed)`.
pub fn run_training(
    genome: &Genome,
    tasks: &[TaskSpec],
    cfg: &TrainerConfig,
) -> Result<(TrajectorySummary, PolicyState)> {
    if tasks.is_empty() {
        return Err(Error::invalid("no training tasks"));
    }
    let cfg = genome.trainer_config(cfg);
    cfg.validate()?;
    genome.estimator.validate()?;
    tasks.iter().try_for_each(TaskSpec::validate)?;

    let shape_length = genome.estimator.algorithm.shapes_length();
    let mut policy = PolicyState::uniform(tasks);
    let mut traj = TrajectorySummary::default();

    for step in 0..cfg.steps {
        let sampled = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| sample_group(t, &policy, &cfg, seed::derive(cfg.seed, &[step, i as u64])))
            .collect::<Result<Vec<_>>>()?;
        let groups: Vec<RewardGroup> = sampled.iter().map(|s| s.group.clone()).collect();
        let advantages = compute_advantages(&groups, &genome.estimator)?;

        let mut per_skill: BTreeMap<&str, (&TaskSpec, GroupGradient)> = BTreeMap::new();
        for ((task, s), adv) in tasks.iter().zip(&sampled).zip(&advantages) {
            let g = group_gradient(&policy, task, s, adv, &cfg, shape_length)?;
            match per_skill.get_mut(task.skill.as_str()) {
                Some((_, acc)) => {
                    acc.logits.iter_mut().zip(&g.logits).for_each(|(a, b)| *a += b);
                    acc.verbosity += g.verbosity;
                }
                None => {
                    per_skill.insert(&task.skill, (task, g));
                }
            }
        }

        let n_samples: usize = groups.iter().map(RewardGroup::len).sum();
        traj.reward_curve
            .push(groups.iter().flat_map(|g| g.samples.iter()).map(|s| s.total_reward).sum::<f64>() / n_samples as f64);
        traj.entropy_curve.push(policy.mean_entropy());
        traj.mean_length_curve.push(
            groups.iter().flat_map(|g| g.samples.iter()).map(|s| s.length as f64).sum::<f64>()
                / n_samples as f64,
        );
        traj.all_fail_fraction_curve
            .push(groups.iter().filter(|g| g.is_all_fail()).count() as f64 / groups.len() as f64);
        traj.grad_norm_curve.push(
            per_skill
                .values()
                .map(|(_, g)| g.norm().powi(2))
                .sum::<f64>()
                .sqrt(),
        );

        for (task, g) in per_skill.values() {
            apply_gradient(&mut policy, task, g, cfg.learning_rate, cfg.length_learning_rate);
        }
        if let Some(schedule) = &cfg.entropy_target_schedule {
            for logits in policy.logits.values_mut() {
                let target = schedule.target(step + 1, logits.len());
                let h = super::policy::entropy(&super::policy::softmax(logits));
                if (h - target).abs() > ENTROPY_DEADBAND {
                    project_entropy(logits, target);
                }
            }
        }
        policy.step += 1;
        policy.validate()?;
    }
    traj.validate()?;
    Ok((traj, policy))
}
