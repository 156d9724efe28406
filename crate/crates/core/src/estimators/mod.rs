//! Group-relative advantage estimators.
//!
//! Every estimator maps one or more [`RewardGroup`]s to index-aligned
//! [`AdvantageVector`]s. All of them are pure functions of their inputs: the
//! same group and config always give bitwise-identical output.
//!
//! Statistics use the population variance (divide by `G`). A spread below
//! `epsilon` is treated as degenerate and yields zeros rather than NaN.

mod batch;
mod efficiency;
mod failure;
mod scaling;
pub(crate) mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use batch::{bn_advantage, sa_advantage};
pub use efficiency::{
    cag_advantage, cag_split, dace_advantage, dace_split, dcbe_advantage, dcbe_split,
    EfficiencySplit,
};
pub use failure::{dfr_advantage, dfr_streams, fa_advantage, DfrStreams};
pub use scaling::{av_advantage, grpo_advantage, msa_advantage, vm_av_advantage};

/// Advantage assigned by the failure-aware estimator to an invalid sample in an all-fail group.
pub const FA_INVALID_PENALTY: f64 = -2.0;
/// Advantage assigned by the failure-aware estimator to a valid but wrong sample in an all-fail group.
pub const FA_WRONG_PENALTY: f64 = -0.5;

/// One rollout of a prompt group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawSample")]
pub struct SampleRecord {
    /// Correctness reward in `[0, 1]`; 1 means verified correct.
    pub reward_correct: f64,
    /// Shaped format component, 0 if unused.
    pub reward_format: f64,
    pub valid: bool,
    /// Response length in tokens.
    pub length: u32,
    /// Mean token entropy of the response, in nats.
    pub token_entropy: f64,
    /// `reward_correct + reward_format`, the reward consumed by the estimators.
    pub total_reward: f64,
}

#[derive(Deserialize)]
struct RawSample {
    reward_correct: f64,
    #[serde(default)]
    reward_format: f64,
    #[serde(default = "default_true")]
    valid: bool,
    #[serde(default = "default_length")]
    length: u32,
    #[serde(default)]
    token_entropy: f64,
    #[serde(default)]
    total_reward: Option<f64>,
}

fn default_true() -> bool {
    true
}

fn default_length() -> u32 {
    1
}

impl From<RawSample> for SampleRecord {
    fn from(raw: RawSample) -> Self {
        SampleRecord {
            reward_correct: raw.reward_correct,
            reward_format: raw.reward_format,
            valid: raw.valid,
            length: raw.length,
            token_entropy: raw.token_entropy,
            total_reward: raw
                .total_reward
                .unwrap_or(raw.reward_correct + raw.reward_format),
        }
    }
}

impl SampleRecord {
    pub fn new(
        reward_correct: f64,
        reward_format: f64,
        valid: bool,
        length: u32,
        token_entropy: f64,
    ) -> Self {
        SampleRecord {
            reward_correct,
            reward_format,
            valid,
            length,
            token_entropy,
            total_reward: reward_correct + reward_format,
        }
    }

    /// A valid sample with a binary correctness reward and no format shaping.
    pub fn binary(correct: bool) -> Self {
        SampleRecord::new(if correct { 1.0 } else { 0.0 }, 0.0, true, 1, 0.0)
    }

    pub fn is_correct(&self) -> bool {
        self.reward_correct > 0.5
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::invalid("sample length must be at least 1"));
        }
        if !self.token_entropy.is_finite() || self.token_entropy < 0.0 {
            return Err(Error::invalid("token entropy must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.reward_correct) {
            return Err(Error::invalid("reward_correct must lie in [0, 1]"));
        }
        if !self.reward_format.is_finite() || !self.total_reward.is_finite() {
            return Err(Error::invalid("rewards must be finite"));
        }
        if !self.valid && self.reward_correct != 0.0 {
            return Err(Error::invalid("an invalid sample cannot carry correctness reward"));
        }
        if (self.total_reward - (self.reward_correct + self.reward_format)).abs() > 1e-9 {
            return Err(Error::invalid(
                "total_reward must equal reward_correct + reward_format",
            ));
        }
        Ok(())
    }
}

/// The `G` responses sampled for one prompt. Output advantages follow sample order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardGroup {
    pub prompt_id: String,
    pub samples: Vec<SampleRecord>,
}

impl RewardGroup {
    pub fn new(prompt_id: impl Into<String>, samples: Vec<SampleRecord>) -> Self {
        RewardGroup {
            prompt_id: prompt_id.into(),
            samples,
        }
    }

    /// Valid group with binary correctness rewards, unit lengths and zero entropy.
    pub fn from_binary(prompt_id: impl Into<String>, rewards: &[f64]) -> Self {
        RewardGroup::new(
            prompt_id,
            rewards
                .iter()
                .map(|&r| SampleRecord::new(r, 0.0, true, 1, 0.0))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid(format!("group `{}` is empty", self.prompt_id)));
        }
        if self.samples.len() < 2 {
            return Err(Error::invalid(format!(
                "group `{}` needs at least 2 samples, got {}",
                self.prompt_id,
                self.samples.len()
            )));
        }
        for sample in &self.samples {
            sample.validate()?;
        }
        Ok(())
    }

    pub fn total_rewards(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.total_reward).collect()
    }

    pub fn correct_rewards(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.reward_correct).collect()
    }

    pub fn pass_rate(&self) -> f64 {
        let correct = self.samples.iter().filter(|s| s.is_correct()).count();
        correct as f64 / self.samples.len() as f64
    }

    pub fn is_all_fail(&self) -> bool {
        self.samples.iter().all(|s| s.reward_correct <= 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Grpo,
    Bn,
    Av,
    VmAv,
    Msa,
    Fa,
    Dfr,
    Sa,
    Dace,
    Cag,
    Dcbe,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
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
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Grpo => "grpo",
            Algorithm::Bn => "bn",
            Algorithm::Av => "av",
            Algorithm::VmAv => "vm_av",
            Algorithm::Msa => "msa",
            Algorithm::Fa => "fa",
            Algorithm::Dfr => "dfr",
            Algorithm::Sa => "sa",
            Algorithm::Dace => "dace",
            Algorithm::Cag => "cag",
            Algorithm::Dcbe => "dcbe",
        }
    }

    /// Estimators whose statistics span the whole batch rather than one group.
    pub fn is_batch(self) -> bool {
        matches!(self, Algorithm::Bn | Algorithm::Sa)
    }

    /// Estimators whose output depends on response length.
    pub fn shapes_length(self) -> bool {
        matches!(
            self,
            Algorithm::VmAv | Algorithm::Msa | Algorithm::Dace | Algorithm::Cag | Algorithm::Dcbe
        )
    }

    pub fn index(self) -> usize {
        Algorithm::ALL.iter().position(|&a| a == self).unwrap()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let norm = norm.strip_suffix("_grpo").unwrap_or(&norm);
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown estimator `{s}`")))
    }
}

/// Estimator choice plus every coefficient any estimator reads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub sigma_min: f64,
    pub sigma_floor: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub alpha_bayes: f64,
    pub beta_bayes: f64,
    pub a_floor: f64,
    pub alpha_uniform: f64,
    pub lambda_len: f64,
    pub lambda_fmt: f64,
    pub alpha_anchor: f64,
    pub sigma_fixed: f64,
    pub alpha_diff_weight: f64,
    pub beta_eff: f64,
    pub beta_base: f64,
    pub lambda_rli: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            algorithm: Algorithm::Grpo,
            epsilon: 1e-6,
            sigma_min: 0.1,
            sigma_floor: 0.1,
            clip_lo: -3.0,
            clip_hi: 3.0,
            alpha_bayes: 1.0,
            beta_bayes: 1.0,
            a_floor: -2.0,
            alpha_uniform: 0.3,
            lambda_len: 0.5,
            lambda_fmt: 0.5,
            alpha_anchor: 0.5,
            sigma_fixed: 0.5,
            alpha_diff_weight: 1.0,
            beta_eff: 0.5,
            beta_base: 0.5,
            lambda_rli: 0.5,
        }
    }
}

impl EstimatorConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        EstimatorConfig {
            algorithm,
            ..EstimatorConfig::default()
        }
    }

    /// Named numeric fields in declaration order.
    pub fn numeric_fields(&self) -> [(&'static str, f64); 17] {
        [
            ("epsilon", self.epsilon),
            ("sigma_min", self.sigma_min),
            ("sigma_floor", self.sigma_floor),
            ("clip_lo", self.clip_lo),
            ("clip_hi", self.clip_hi),
            ("alpha_bayes", self.alpha_bayes),
            ("beta_bayes", self.beta_bayes),
            ("a_floor", self.a_floor),
            ("alpha_uniform", self.alpha_uniform),
            ("lambda_len", self.lambda_len),
            ("lambda_fmt", self.lambda_fmt),
            ("alpha_anchor", self.alpha_anchor),
            ("sigma_fixed", self.sigma_fixed),
            ("alpha_diff_weight", self.alpha_diff_weight),
            ("beta_eff", self.beta_eff),
            ("beta_base", self.beta_base),
            ("lambda_rli", self.lambda_rli),
        ]
    }

    pub fn get(&self, field: &str) -> Option<f64> {
        self.numeric_fields()
            .iter()
            .find(|(name, _)| *name == field)
            .map(|&(_, v)| v)
    }

    pub fn set(&mut self, field: &str, value: f64) -> Result<()> {
        let slot = match field {
            "epsilon" => &mut self.epsilon,
            "sigma_min" => &mut self.sigma_min,
            "sigma_floor" => &mut self.sigma_floor,
            "clip_lo" => &mut self.clip_lo,
            "clip_hi" => &mut self.clip_hi,
            "alpha_bayes" => &mut self.alpha_bayes,
            "beta_bayes" => &mut self.beta_bayes,
            "a_floor" => &mut self.a_floor,
            "alpha_uniform" => &mut self.alpha_uniform,
            "lambda_len" => &mut self.lambda_len,
            "lambda_fmt" => &mut self.lambda_fmt,
            "alpha_anchor" => &mut self.alpha_anchor,
            "sigma_fixed" => &mut self.sigma_fixed,
            "alpha_diff_weight" => &mut self.alpha_diff_weight,
            "beta_eff" => &mut self.beta_eff,
            "beta_base" => &mut self.beta_base,
            "lambda_rli" => &mut self.lambda_rli,
            other => return Err(Error::config(other, "no such estimator field")),
        };
        *slot = value;
        Ok(())
    }

    /// Structural checks. Zero scale parameters pass here; the numerical
    /// hazards they cause surface as non-finite advantages at run time.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.numeric_fields() {
            if !value.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if self.clip_lo >= self.clip_hi {
            return Err(Error::config(
                "clip_lo",
                format!("clip_lo {} must be below clip_hi {}", self.clip_lo, self.clip_hi),
            ));
        }
        const NON_NEGATIVE: [&str; 12] = [
            "epsilon",
            "sigma_min",
            "sigma_floor",
            "alpha_bayes",
            "beta_bayes",
            "lambda_len",
            "lambda_fmt",
            "sigma_fixed",
            "alpha_diff_weight",
            "beta_eff",
            "beta_base",
            "lambda_rli",
        ];
        for name in NON_NEGATIVE {
            if self.get(name).unwrap() < 0.0 {
                return Err(Error::config(name, "must be non-negative"));
            }
        }
        if !(self.alpha_uniform > 0.0 && self.alpha_uniform <= 1.0) {
            return Err(Error::config("alpha_uniform", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.alpha_anchor) {
            return Err(Error::config("alpha_anchor", "must lie in [0, 1]"));
        }
        Ok(())
    }

    fn clip(&self, x: f64) -> f64 {
        x.clamp(self.clip_lo, self.clip_hi)
    }
}

/// Per-sample advantages for one group, plus named diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvantageVector {
    pub values: Vec<f64>,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl AdvantageVector {
    pub fn new(values: Vec<f64>) -> Self {
        AdvantageVector {
            values,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Runs the configured estimator over a batch of groups.
///
/// Batch estimators see the whole slice at once; the rest are applied group
/// by group. Any non-finite output is reported with the offending group.
pub fn compute_advantages(
    batch: &[RewardGroup],
    cfg: &EstimatorConfig,
) -> Result<Vec<AdvantageVector>> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let wrap = |group: &RewardGroup, err: Error| Error::Estimator {
        algorithm: cfg.algorithm.to_string(),
        prompt_id: group.prompt_id.clone(),
        source: Box::new(err),
    };
    let out = match cfg.algorithm {
        Algorithm::Bn => bn_advantage(batch, cfg).map_err(|e| wrap(&batch[0], e))?,
        Algorithm::Sa => sa_advantage(batch, cfg).map_err(|e| wrap(&batch[0], e))?,
        algorithm => batch
            .iter()
            .map(|group| {
                let adv = match algorithm {
                    Algorithm::Grpo => grpo_advantage(group, cfg),
                    Algorithm::Av => av_advantage(group, cfg),
                    Algorithm::VmAv => vm_av_advantage(group, cfg),
                    Algorithm::Msa => msa_advantage(group, cfg),
                    Algorithm::Fa => fa_advantage(group, cfg),
                    Algorithm::Dfr => dfr_advantage(group, cfg),
                    Algorithm::Dace => dace_advantage(group, cfg),
                    Algorithm::Cag => cag_advantage(group, cfg),
                    Algorithm::Dcbe => dcbe_advantage(group, cfg),
                    Algorithm::Bn | Algorithm::Sa => unreachable!(),
                };
                adv.map_err(|e| wrap(group, e))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    for (group, adv) in batch.iter().zip(&out) {
        if !adv.is_finite() {
            return Err(wrap(
                group,
                Error::NonFinite {
                    context: "advantage vector".into(),
                },
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
            let json = serde_json::to_string(&alg).unwrap();
            assert_eq!(json, format!("\"{}\"", alg.name()));
        }
        assert_eq!("VM-AV-GRPO".parse::<Algorithm>().unwrap(), Algorithm::VmAv);
        assert!("ppo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_parses_partial_json_with_defaults() {
        let cfg: EstimatorConfig =
            serde_json::from_str(r#"{"algorithm": "fa", "clip_hi": 2.5}"#).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Fa);
        assert_eq!(cfg.clip_hi, 2.5);
        assert_eq!(cfg.sigma_min, 0.1);
        assert!(serde_json::from_str::<EstimatorConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn config_validation_names_the_field() {
        let mut cfg = EstimatorConfig::default();
        cfg.clip_lo = 4.0;
        match cfg.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "clip_lo"),
            other => panic!("{other:?}"),
        }
        let mut cfg = EstimatorConfig::default();
        cfg.sigma_min = -0.1;
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig { ref field, .. }) if field == "sigma_min"
        ));
        let mut cfg = EstimatorConfig::default();
        cfg.alpha_uniform = 0.0;
        assert!(cfg.validate().is_err());
        assert!(EstimatorConfig::default().validate().is_ok());
    }

    #[test]
    fn sample_total_reward_is_filled_when_missing() {
        let s: SampleRecord =
            serde_json::from_str(r#"{"reward_correct": 1.0, "reward_format": 0.1}"#).unwrap();
        assert!((s.total_reward - 1.1).abs() < 1e-12);
        assert!(s.valid);
        assert_eq!(s.length, 1);
    }

    #[test]
    fn group_validation() {
        assert!(RewardGroup::new("p", vec![]).validate().is_err());
        assert!(RewardGroup::from_binary("p", &[1.0]).validate().is_err());
        let mut g = RewardGroup::from_binary("p", &[1.0, 0.0]);
        assert!(g.validate().is_ok());
        g.samples[0].valid = false;
        assert!(g.validate().is_err());
    }

    #[test]
    fn dispatch_reports_non_finite_output() {
        let mut cfg = EstimatorConfig::for_algorithm(Algorithm::Sa);
        cfg.sigma_fixed = 0.0;
        let batch = vec![RewardGroup::from_binary("q7", &[1.0, 0.0, 0.0])];
        match compute_advantages(&batch, &cfg) {
            Err(Error::Estimator { prompt_id, .. }) => assert_eq!(prompt_id, "q7"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dispatch_is_index_aligned() {
        let batch = vec![
            RewardGroup::from_binary("a", &[1.0, 0.0]),
            RewardGroup::from_binary("b", &[0.0, 0.0, 1.0]),
        ];
        for alg in Algorithm::ALL {
            let out = compute_advantages(&batch, &EstimatorConfig::for_algorithm(alg)).unwrap();
            assert_eq!(out.len(), 2);
            assert_eq!(out[0].len(), 2);
            assert_eq!(out[1].len(), 3);
        }
    }
}
