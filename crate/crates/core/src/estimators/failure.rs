//! Estimators that keep a learning signal alive in all-fail groups.

use super::stats::{group_relative, zscores};
use super::{AdvantageVector, EstimatorConfig, RewardGroup, FA_INVALID_PENALTY, FA_WRONG_PENALTY};
use crate::error::Result;

/// Two-regime advantage. Groups with any correctness reward get clipped
/// group-relative z-scores; all-fail groups get fixed penalties that still
/// separate invalid output from valid-but-wrong output.
pub fn fa_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    group.validate()?;
    let r_max = group
        .samples
        .iter()
        .map(|s| s.reward_correct)
        .fold(f64::NEG_INFINITY, f64::max);
    if r_max > 0.0 {
        let values = group_relative(&group.total_rewards(), cfg.epsilon)
            .into_iter()
            .map(|a| cfg.clip(a))
            .collect();
        Ok(AdvantageVector::new(values).with("regime", 0.0))
    } else {
        let values = group
            .samples
            .iter()
            .map(|s| if s.valid { FA_WRONG_PENALTY } else { FA_INVALID_PENALTY })
            .collect();
        Ok(AdvantageVector::new(values).with("regime", 1.0))
    }
}

/// The two independently normalized DFR streams.
#[derive(Clone, Debug, PartialEq)]
pub struct DfrStreams {
    pub reason: Vec<f64>,
    pub format: Vec<f64>,
    /// True when the reason stream came from token entropy.
    pub entropy_fallback: bool,
}

/// Computes the reason and format streams without combining them.
///
/// The format stream is the z-score of the validity indicator. The reason
/// stream is the z-score of correctness when any sample is correct and
/// otherwise the z-score of mean token entropy, so higher-entropy failures
/// rank above lower-entropy ones.
pub fn dfr_streams(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<DfrStreams> {
    group.validate()?;
    let validity: Vec<f64> = group
        .samples
        .iter()
        .map(|s| if s.valid { 1.0 } else { 0.0 })
        .collect();
    let format = zscores(&validity, cfg.epsilon);
    let entropy_fallback = group.is_all_fail();
    let reason = if entropy_fallback {
        let entropy: Vec<f64> = group.samples.iter().map(|s| s.token_entropy).collect();
        zscores(&entropy, cfg.epsilon)
    } else {
        zscores(&group.correct_rewards(), cfg.epsilon)
    };
    Ok(DfrStreams {
        reason,
        format,
        entropy_fallback,
    })
}

/// `A_reason + lambda_fmt * A_format`.
pub fn dfr_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    let streams = dfr_streams(group, cfg)?;
    let values = streams
        .reason
        .iter()
        .zip(&streams.format)
        .map(|(r, f)| r + cfg.lambda_fmt * f)
        .collect();
    Ok(AdvantageVector::new(values).with(
        "entropy_fallback",
        if streams.entropy_fallback { 1.0 } else { 0.0 },
    ))
}
