//! Normalization-centred estimators: empirical, analytic-variance,
//! validity-masked and regime-aware scaling.

use super::stats::{group_relative, is_degenerate, mean, pop_std, MIN_SPREAD};
use super::{AdvantageVector, EstimatorConfig, RewardGroup};
use crate::error::Result;

/// Group-relative advantage on total reward: `(R - mu) / sqrt(var + eps)`.
pub fn grpo_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    group.validate()?;
    let rewards = group.total_rewards();
    let values = group_relative(&rewards, cfg.epsilon);
    Ok(AdvantageVector::new(values)
        .with("mu", mean(&rewards))
        .with("sigma_used", (pop_std(&rewards).powi(2) + cfg.epsilon).sqrt()))
}

/// Analytic-variance scaling: the denominator is `sqrt(E[R^2] - E[R]^2)`,
/// floored at `sigma_min`. For binary rewards this is `sqrt(mu (1 - mu))`.
pub fn av_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    group.validate()?;
    let rewards = group.total_rewards();
    let mu = mean(&rewards);
    let mu2 = rewards.iter().map(|r| r * r).sum::<f64>() / rewards.len() as f64;
    let sigma_analytic = (mu2 - mu * mu).max(0.0).sqrt();
    let denom = sigma_analytic.max(cfg.sigma_min);
    let values = if denom < MIN_SPREAD {
        vec![0.0; rewards.len()]
    } else {
        rewards.iter().map(|r| (r - mu) / denom).collect()
    };
    Ok(AdvantageVector::new(values)
        .with("mu", mu)
        .with("sigma_analytic", sigma_analytic)
        .with("sigma_used", denom))
}

/// Validity-masked analytic variance.
///
/// Statistics come from the format-valid subset only, with Beta smoothing on
/// the correctness reward; invalid samples take `a_floor`. Negative valid
/// advantages are then divided by `clip(L_i / mean_valid_L, 0.5, 2.0)`.
/// With no valid sample every entry is `a_floor` and `no_valid` is set.
pub fn vm_av_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    group.validate()?;
    let valid: Vec<usize> = (0..group.len()).filter(|&i| group.samples[i].valid).collect();
    if valid.is_empty() {
        return Ok(AdvantageVector::new(vec![cfg.a_floor; group.len()])
            .with("no_valid", 1.0)
            .with("n_valid", 0.0));
    }

    let n_valid = valid.len() as f64;
    let sum_valid: f64 = valid.iter().map(|&i| group.samples[i].reward_correct).sum();
    let mu_valid = (sum_valid + cfg.alpha_bayes) / (n_valid + cfg.alpha_bayes + cfg.beta_bayes);
    let sigma_valid = (mu_valid * (1.0 - mu_valid)).max(0.0).sqrt();
    let denom = sigma_valid.max(cfg.sigma_floor);
    let mean_len = valid
        .iter()
        .map(|&i| group.samples[i].length as f64)
        .sum::<f64>()
        / n_valid;

    let values = group
        .samples
        .iter()
        .map(|s| {
            if !s.valid {
                return cfg.a_floor;
            }
            let a = if denom < MIN_SPREAD {
                0.0
            } else {
                (s.reward_correct - mu_valid) / denom
            };
            if a < 0.0 {
                let rel = (s.length as f64 / mean_len).clamp(0.5, 2.0);
                a / rel
            } else {
                a
            }
        })
        .collect();

    Ok(AdvantageVector::new(values)
        .with("mu_valid", mu_valid)
        .with("sigma_used", denom)
        .with("n_valid", n_valid)
        .with("mean_valid_length", mean_len))
}

/// Regime-aware anchor selection.
///
/// Mixed groups (correct and incorrect present) are scored on correctness
/// with the outcome spread; uniform groups fall back to the spread of total
/// reward and are damped by `alpha_uniform`. Positive advantages are then
/// multiplied by `(L_i / mean_L)^lambda`, negative ones by its inverse.
pub fn msa_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    group.validate()?;
    let outcome = group.correct_rewards();
    let total = group.total_rewards();
    let sigma_outcome = pop_std(&outcome);
    let mixed = sigma_outcome > cfg.epsilon;

    let (signal, sigma_anchor, scale) = if mixed {
        (&outcome, sigma_outcome, 1.0)
    } else {
        (&total, pop_std(&total), cfg.alpha_uniform)
    };

    let mean_len = group.samples.iter().map(|s| s.length as f64).sum::<f64>() / group.len() as f64;
    let values = if is_degenerate(sigma_anchor, cfg.epsilon) {
        vec![0.0; group.len()]
    } else {
        let mu = mean(signal);
        signal
            .iter()
            .zip(&group.samples)
            .map(|(x, s)| {
                let scaled = (x - mu) / sigma_anchor * scale;
                let ratio = s.length as f64 / mean_len;
                if scaled > 0.0 {
                    scaled * ratio.powf(cfg.lambda_len)
                } else if scaled < 0.0 {
                    scaled * ratio.powf(-cfg.lambda_len)
                } else {
                    0.0
                }
            })
            .collect()
    };

    Ok(AdvantageVector::new(values)
        .with("regime", if mixed { 0.0 } else { 1.0 })
        .with("sigma_used", sigma_anchor)
        .with("scale", scale))
}
