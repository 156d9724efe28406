//! Estimators whose scale or baseline is shared across the whole batch.

use super::stats::{mean, MIN_SPREAD};
use super::{AdvantageVector, EstimatorConfig, RewardGroup};
use crate::error::{Error, Result};

fn validate_batch(batch: &[RewardGroup]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    batch.iter().try_for_each(RewardGroup::validate)
}

/// Group-centred residuals divided by the batch RMS residual, then clipped.
pub fn bn_advantage(batch: &[RewardGroup], cfg: &EstimatorConfig) -> Result<Vec<AdvantageVector>> {
    validate_batch(batch)?;
    let residuals: Vec<Vec<f64>> = batch
        .iter()
        .map(|g| {
            let r = g.total_rewards();
            let mu = mean(&r);
            r.into_iter().map(|x| x - mu).collect()
        })
        .collect();
    let count: usize = residuals.iter().map(Vec::len).sum();
    let sum_sq: f64 = residuals.iter().flatten().map(|x| x * x).sum();
    let sigma_batch = (sum_sq / count as f64).sqrt();
    let degenerate = !(sigma_batch + cfg.epsilon >= MIN_SPREAD);

    Ok(residuals
        .into_iter()
        .map(|raw| {
            let values = if degenerate {
                vec![0.0; raw.len()]
            } else {
                raw.iter()
                    .map(|x| cfg.clip(x / (sigma_batch + cfg.epsilon)))
                    .collect()
            };
            AdvantageVector::new(values).with("sigma_batch", sigma_batch)
        })
        .collect())
}

/// Dual-anchor baseline with a fixed scale:
/// `(R - (alpha * mu_group + (1 - alpha) * mu_batch)) / sigma_fixed`.
pub fn sa_advantage(batch: &[RewardGroup], cfg: &EstimatorConfig) -> Result<Vec<AdvantageVector>> {
    validate_batch(batch)?;
    let all: Vec<f64> = batch.iter().flat_map(RewardGroup::total_rewards).collect();
    let mu_batch = mean(&all);
    Ok(batch
        .iter()
        .map(|g| {
            let r = g.total_rewards();
            let mu_group = mean(&r);
            let anchor = cfg.alpha_anchor * mu_group + (1.0 - cfg.alpha_anchor) * mu_batch;
            let values = r.iter().map(|x| (x - anchor) / cfg.sigma_fixed).collect();
            AdvantageVector::new(values)
                .with("mu_anchor", anchor)
                .with("mu_batch", mu_batch)
        })
        .collect())
}
