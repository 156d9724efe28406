use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use super::task::TaskSpec;
use super::trainer::TrainerConfig;
use crate::error::{Error, Result};
use crate::estimators::{AdvantageVector, RewardGroup, SampleRecord};
use crate::seed;

/// Hard generation cap in tokens.
pub const MAX_LENGTH: f64 = 4096.0;
/// Half-width of the uniform noise added to the reported token entropy.
pub const ENTROPY_NOISE: f64 = 0.05;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Policy parameters keyed by skill. A skill absent from the maps behaves
/// as uniform logits with zero verbosity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub logits: BTreeMap<String, Vec<f64>>,
    pub verbosity: BTreeMap<String, f64>,
    pub step: u64,
}

impl PolicyState {
    /// Uniform policy over every skill in `tasks`.
    pub fn uniform(tasks: &[TaskSpec]) -> Self {
        let mut logits = BTreeMap::new();
        let mut verbosity = BTreeMap::new();
        for t in tasks {
            logits.entry(t.skill.clone()).or_insert_with(|| vec![0.0; t.n_strategies]);
            verbosity.entry(t.skill.clone()).or_insert(0.0);
        }
        PolicyState {
            logits,
            verbosity,
            step: 0,
        }
    }

    pub fn probs(&self, task: &TaskSpec) -> Vec<f64> {
        match self.logits.get(&task.skill) {
            Some(l) if l.len() == task.n_strategies => softmax(l),
            _ => vec![1.0 / task.n_strategies as f64; task.n_strategies],
        }
    }

    pub fn verbosity(&self, task: &TaskSpec) -> f64 {
        self.verbosity.get(&task.skill).copied().unwrap_or(0.0)
    }

    pub fn entropy(&self, task: &TaskSpec) -> f64 {
        entropy(&self.probs(task))
    }

    /// Mean policy entropy over all skills.
    pub fn mean_entropy(&self) -> f64 {
        if self.logits.is_empty() {
            return 0.0;
        }
        self.logits.values().map(|l| entropy(&softmax(l))).sum::<f64>() / self.logits.len() as f64
    }

    /// Mean length implied by the verbosity of `task`'s skill.
    pub fn expected_length(&self, task: &TaskSpec) -> f64 {
        (task.length_base * self.verbosity(task).exp()).clamp(1.0, MAX_LENGTH)
    }

    pub fn validate(&self) -> Result<()> {
        for (skill, l) in &self.logits {
            if l.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("logits of skill `{skill}`"),
                });
            }
        }
        for (skill, v) in &self.verbosity {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("verbosity of skill `{skill}`"),
                });
            }
        }
        Ok(())
    }
}

/// A sampled group together with the strategy each sample chose.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledGroup {
    pub group: RewardGroup,
    pub actions: Vec<usize>,
}

/// Draws `cfg.group_size` responses for one task.
pub fn sample_group(
    task: &TaskSpec,
    policy: &PolicyState,
    cfg: &TrainerConfig,
    rng_seed: u64,
) -> Result<SampledGroup> {
    task.validate()?;
    let mut rng = seed::rng(rng_seed);
    let probs = policy.probs(task);
    let h = entropy(&probs);
    let choose = WeightedIndex::new(&probs)
        .map_err(|e| Error::invalid(format!("policy for `{}`: {e}", task.skill)))?;
    let sigma_log = task.length_spread / task.length_base;
    let lengths = LogNormal::new(
        (task.length_base * policy.verbosity(task).exp()).ln(),
        sigma_log,
    )
    .map_err(|e| Error::invalid(format!("length model for `{}`: {e}", task.task_id)))?;

    let mut samples = Vec::with_capacity(cfg.group_size);
    let mut actions = Vec::with_capacity(cfg.group_size);
    for _ in 0..cfg.group_size {
        let action = choose.sample(&mut rng);
        let valid = rng.random::<f64>() >= task.format_noise;
        let correct = valid && task.solvable && action == task.target_strategy;
        let length = lengths.sample(&mut rng).clamp(1.0, MAX_LENGTH).round() as u32;
        let noise = rng.random_range(-ENTROPY_NOISE..=ENTROPY_NOISE);
        samples.push(SampleRecord::new(
            if correct { 1.0 } else { 0.0 },
            if valid { cfg.format_reward } else { 0.0 },
            valid,
            length,
            (h + noise).max(0.0),
        ));
        actions.push(action);
    }
    Ok(SampledGroup {
        group: RewardGroup::new(task.task_id.clone(), samples),
        actions,
    })
}

/// Gradient of one group's objective with respect to the skill's logits
/// and verbosity.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupGradient {
    pub logits: Vec<f64>,
    pub verbosity: f64,
}

impl GroupGradient {
    pub fn norm(&self) -> f64 {
        (self.logits.iter().map(|g| g * g).sum::<f64>() + self.verbosity * self.verbosity).sqrt()
    }
}

/// Policy gradient `(1/G) sum_i A_i (e_{a_i} - pi)`, minus `beta_kl` times
/// the gradient of KL to the uniform initial policy, plus `entropy_coeff`
/// times the entropy gradient. The verbosity component is a natural
/// gradient on the log-length mean and is only produced when
/// `shape_length` is set.
pub fn group_gradient(
    policy: &PolicyState,
    task: &TaskSpec,
    sampled: &SampledGroup,
    advantages: &AdvantageVector,
    cfg: &TrainerConfig,
    shape_length: bool,
) -> Result<GroupGradient> {
    let g = sampled.group.len();
    if advantages.len() != g || sampled.actions.len() != g {
        return Err(Error::invalid(format!(
            "advantages ({}) not aligned with group `{}` ({g})",
            advantages.len(),
            sampled.group.prompt_id
        )));
    }
    let pi = policy.probs(task);
    let n = pi.len();
    let mut grad = vec![0.0; n];
    for (a, &action) in advantages.values.iter().zip(&sampled.actions) {
        if action >= n {
            return Err(Error::invalid(format!("action {action} out of range")));
        }
        for (k, gk) in grad.iter_mut().enumerate() {
            let indicator = if k == action { 1.0 } else { 0.0 };
            *gk += a * (indicator - pi[k]);
        }
    }
    grad.iter_mut().for_each(|x| *x /= g as f64);

    // zero-probability strategies contribute nothing in the p ln p limit
    let safe_ln = |x: f64| if x > 0.0 { x.ln() } else { 0.0 };
    let log_ratio: Vec<f64> = pi.iter().map(|&p| safe_ln(p * n as f64)).collect();
    let kl: f64 = pi.iter().zip(&log_ratio).map(|(p, r)| p * r).sum();
    let h = entropy(&pi);
    for k in 0..n {
        let d_kl = pi[k] * (log_ratio[k] - kl);
        let d_h = -pi[k] * (safe_ln(pi[k]) + h);
        grad[k] += -cfg.beta_kl * d_kl + cfg.entropy_coeff * d_h;
    }

    let verbosity = if shape_length {
        let mu_log = (task.length_base * policy.verbosity(task).exp()).ln();
        advantages
            .values
            .iter()
            .zip(&sampled.group.samples)
            .map(|(a, s)| a * ((s.length as f64).ln() - mu_log))
            .sum::<f64>()
            / g as f64
    } else {
        0.0
    };

    let out = GroupGradient {
        logits: grad,
        verbosity,
    };
    if !out.logits.iter().all(|x| x.is_finite()) || !out.verbosity.is_finite() {
        return Err(Error::NonFinite {
            context: format!(
                "gradient for group `{}`: logits {:?}{}, verbosity {}, advantages {:?}",
                sampled.group.prompt_id,
                &out.logits[..out.logits.len().min(8)],
                if out.logits.len() > 8 { " ..." } else { "" },
                out.verbosity,
                advantages.values
            ),
        });
    }
    Ok(out)
}

/// Applies one group's gradient step and returns the updated policy and
/// the gradient norm.
pub fn policy_gradient_update(
    policy: &PolicyState,
    task: &TaskSpec,
    sampled: &SampledGroup,
    advantages: &AdvantageVector,
    cfg: &TrainerConfig,
    shape_length: bool,
) -> Result<(PolicyState, f64)> {
    let grad = group_gradient(policy, task, sampled, advantages, cfg, shape_length)?;
    let mut next = policy.clone();
    apply_gradient(&mut next, task, &grad, cfg.learning_rate, cfg.length_learning_rate);
    Ok((next, grad.norm()))
}

pub(crate) fn apply_gradient(
    policy: &mut PolicyState,
    task: &TaskSpec,
    grad: &GroupGradient,
    lr: f64,
    length_lr: f64,
) {
    let logits = policy
        .logits
        .entry(task.skill.clone())
        .or_insert_with(|| vec![0.0; task.n_strategies]);
    for (l, g) in logits.iter_mut().zip(&grad.logits) {
        *l += lr * g;
    }
    *policy.verbosity.entry(task.skill.clone()).or_insert(0.0) += length_lr * grad.verbosity;
}

/// Rescales `logits` by a temperature factor so the policy entropy hits
/// `target`. Flat logits cannot be sharpened and are left alone.
pub fn project_entropy(logits: &mut [f64], target: f64) {
    let n = logits.len() as f64;
    let target = target.clamp(0.0, n.ln());
    let at = |c: f64| entropy(&softmax(&logits.iter().map(|l| l * c).collect::<Vec<_>>()));
    let spread = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - logits.iter().copied().fold(f64::INFINITY, f64::min);
    if spread < 1e-12 {
        return;
    }
    // entropy falls monotonically as the scale grows
    let (mut lo, mut hi) = (0.0, 1.0);
    while at(hi) > target && hi < 1e6 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    logits.iter_mut().for_each(|l| *l *= c);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::task::Curriculum;
    use crate::estimators::AdvantageVector;

    fn task(n: usize, noise: f64) -> TaskSpec {
        let mut t = Curriculum::standard(0).train[0].clone();
        t.n_strategies = n;
        t.target_strategy = 2;
        t.format_noise = noise;
        t.skill = "k".into();
        t
    }

    #[test]
    fn uniform_policy_success_rate() {
        let t = task(8, 0.0);
        let policy = PolicyState::uniform(std::slice::from_ref(&t));
        let cfg = TrainerConfig {
            group_size: 4000,
            ..TrainerConfig::default()
        };
        let s = sample_group(&t, &policy, &cfg, 1).unwrap();
        let rate = s.group.pass_rate();
        assert!((rate - 0.125).abs() < 0.02, "{rate}");
        assert!(s.group.samples.iter().all(|x| x.length >= 1 && x.length <= 4096));
        s.group.validate().unwrap();
    }

    #[test]
    fn concentrated_policy_is_almost_always_correct() {
        let t = task(8, 0.0);
        let mut policy = PolicyState::uniform(std::slice::from_ref(&t));
        let l = policy.logits.get_mut("k").unwrap();
        l[2] = (0.99f64 / 0.01 * 7.0).ln();
        assert!((policy.probs(&t)[2] - 0.99).abs() < 1e-12);
        let s = sample_group(&t, &policy, &TrainerConfig::default(), 5).unwrap();
        assert!(s.group.pass_rate() >= 0.75);
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = task(8, 0.2);
        let policy = PolicyState::uniform(std::slice::from_ref(&t));
        let cfg = TrainerConfig::default();
        assert_eq!(
            sample_group(&t, &policy, &cfg, 9).unwrap(),
            sample_group(&t, &policy, &cfg, 9).unwrap()
        );
    }

    #[test]
    fn zero_advantages_leave_policy_unchanged() {
        let t = task(4, 0.0);
        let policy = PolicyState::uniform(std::slice::from_ref(&t));
        let cfg = TrainerConfig::default();
        let s = sample_group(&t, &policy, &cfg, 2).unwrap();
        let adv = AdvantageVector::new(vec![0.0; s.group.len()]);
        let (next, norm) = policy_gradient_update(&policy, &t, &s, &adv, &cfg, true).unwrap();
        assert_eq!(next.logits, policy.logits);
        assert_eq!(next.verbosity, policy.verbosity);
        assert_eq!(norm, 0.0);
    }

    #[test]
    fn positive_advantage_raises_chosen_logit() {
        let t = task(4, 0.0);
        let policy = PolicyState::uniform(std::slice::from_ref(&t));
        let cfg = TrainerConfig::default();
        let mut s = sample_group(&t, &policy, &cfg, 2).unwrap();
        s.actions = vec![1; s.actions.len()];
        let mut values = vec![0.0; s.group.len()];
        values[0] = 1.0;
        let (next, _) =
            policy_gradient_update(&policy, &t, &s, &AdvantageVector::new(values), &cfg, false)
                .unwrap();
        assert!(next.logits["k"][1] > policy.logits["k"][1]);
    }

    #[test]
    fn kl_gradient_vanishes_at_anchor() {
        let t = task(4, 0.0);
        let policy = PolicyState::uniform(std::slice::from_ref(&t));
        let cfg = TrainerConfig {
            beta_kl: 100.0,
            entropy_coeff: 5.0,
            ..TrainerConfig::default()
        };
        let s = sample_group(&t, &policy, &cfg, 3).unwrap();
        let adv = AdvantageVector::new(vec![0.0; s.group.len()]);
        let g = group_gradient(&policy, &t, &s, &adv, &cfg, false).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn kl_gradient_matches_finite_difference() {
        let t = task(3, 0.0);
        let mut policy = PolicyState::uniform(std::slice::from_ref(&t));
        policy.logits.insert("k".into(), vec![0.3, -0.2, 0.5]);
        let cfg = TrainerConfig {
            beta_kl: 1.0,
            entropy_coeff: 0.0,
            ..TrainerConfig::default()
        };
        let s = sample_group(&t, &policy, &cfg, 3).unwrap();
        let adv = AdvantageVector::new(vec![0.0; s.group.len()]);
        let g = group_gradient(&policy, &t, &s, &adv, &cfg, false).unwrap();
        let kl = |l: &[f64]| {
            softmax(l)
                .iter()
                .map(|p| p * (p * 3.0).ln())
                .sum::<f64>()
        };
        let base = policy.logits["k"].clone();
        for k in 0..3 {
            let mut up = base.clone();
            up[k] += 1e-6;
            let mut dn = base.clone();
            dn[k] -= 1e-6;
            let fd = (kl(&up) - kl(&dn)) / 2e-6;
            assert!((g.logits[k] + fd).abs() < 1e-6);
        }
    }

    #[test]
    fn entropy_projection_hits_target() {
        let mut l = vec![2.0, 0.5, -1.0, 0.0, 0.1];
        project_entropy(&mut l, 0.8);
        assert!((entropy(&softmax(&l)) - 0.8).abs() < 1e-9);
        let mut flat = vec![0.0; 4];
        project_entropy(&mut flat, 0.5);
        assert_eq!(flat, vec![0.0; 4]);
    }
}
