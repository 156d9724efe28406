//! Accuracy-plus-efficiency estimators for length compression.
//!
//! Each one adds a length term to a group-relative accuracy advantage and
//! gates that term on correctness, so incorrect samples never earn or lose
//! credit for their length.

use super::stats::{group_relative, mean, zscores};
use super::{AdvantageVector, EstimatorConfig, RewardGroup};
use crate::error::Result;

/// Accuracy and efficiency contributions, summed to form the advantage.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencySplit {
    pub accuracy: Vec<f64>,
    pub efficiency: Vec<f64>,
    pub pass_rate: f64,
}

impl EfficiencySplit {
    fn into_advantage(self) -> AdvantageVector {
        let values = self
            .accuracy
            .iter()
            .zip(&self.efficiency)
            .map(|(a, e)| a + e)
            .collect();
        AdvantageVector::new(values).with("pass_rate", self.pass_rate)
    }
}

fn accuracy_term(group: &RewardGroup, cfg: &EstimatorConfig) -> Vec<f64> {
    group_relative(&group.correct_rewards(), cfg.epsilon)
}

fn correct_indices(group: &RewardGroup) -> Vec<usize> {
    (0..group.len()).filter(|&i| group.samples[i].is_correct()).collect()
}

fn mean_correct_length(group: &RewardGroup, correct: &[usize]) -> f64 {
    let lengths: Vec<f64> = correct.iter().map(|&i| group.samples[i].length as f64).collect();
    mean(&lengths)
}

/// Difficulty-aware reweighting: the accuracy term is amplified on hard
/// groups and the efficiency term, the z-score of negative length within
/// the correct subset, is weighted by pass rate.
pub fn dace_split(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<EfficiencySplit> {
    group.validate()?;
    let pass_rate = group.pass_rate();
    let boost = 1.0 + cfg.alpha_diff_weight * (1.0 - pass_rate);
    let accuracy = accuracy_term(group, cfg).into_iter().map(|a| a * boost).collect();

    let correct = correct_indices(group);
    let mut efficiency = vec![0.0; group.len()];
    if correct.len() >= 2 {
        let neg_len: Vec<f64> = correct
            .iter()
            .map(|&i| -(group.samples[i].length as f64))
            .collect();
        for (&i, z) in correct.iter().zip(zscores(&neg_len, cfg.epsilon)) {
            efficiency[i] = cfg.beta_eff * z * pass_rate;
        }
    }
    Ok(EfficiencySplit {
        accuracy,
        efficiency,
        pass_rate,
    })
}

pub fn dace_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    Ok(dace_split(group, cfg)?.into_advantage())
}

/// Cost-style efficiency: only correct samples longer than the mean correct
/// length are penalized, by `beta_base * SR^2 * (mu_L - L) / mu_L`.
pub fn cag_split(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<EfficiencySplit> {
    group.validate()?;
    let pass_rate = group.pass_rate();
    let accuracy = accuracy_term(group, cfg);
    let correct = correct_indices(group);
    let mut efficiency = vec![0.0; group.len()];
    if !correct.is_empty() {
        let mu_l = mean_correct_length(group, &correct);
        let beta = cfg.beta_base * pass_rate * pass_rate;
        for &i in &correct {
            let cost = ((mu_l - group.samples[i].length as f64) / mu_l).min(0.0);
            efficiency[i] = beta * cost;
        }
    }
    Ok(EfficiencySplit {
        accuracy,
        efficiency,
        pass_rate,
    })
}

pub fn cag_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    Ok(cag_split(group, cfg)?.into_advantage())
}

/// Relative length improvement `(mu_L - L) / (mu_L + eps)` on correct
/// samples, gated by the squared pass rate.
pub fn dcbe_split(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<EfficiencySplit> {
    group.validate()?;
    let pass_rate = group.pass_rate();
    let accuracy = accuracy_term(group, cfg);
    let correct = correct_indices(group);
    let mut efficiency = vec![0.0; group.len()];
    if !correct.is_empty() {
        let mu_l = mean_correct_length(group, &correct);
        let gate = cfg.lambda_rli * pass_rate * pass_rate;
        for &i in &correct {
            let rli = (mu_l - group.samples[i].length as f64) / (mu_l + cfg.epsilon);
            efficiency[i] = gate * rli;
        }
    }
    Ok(EfficiencySplit {
        accuracy,
        efficiency,
        pass_rate,
    })
}

pub fn dcbe_advantage(group: &RewardGroup, cfg: &EstimatorConfig) -> Result<AdvantageVector> {
    Ok(dcbe_split(group, cfg)?.into_advantage())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{Algorithm, SampleRecord};

    /// Eight samples: two correct (lengths 300 and 500), six wrong.
    fn two_of_eight() -> RewardGroup {
        let mut samples = vec![
            SampleRecord::new(1.0, 0.0, true, 300, 0.0),
            SampleRecord::new(1.0, 0.0, true, 500, 0.0),
        ];
        samples.extend((0..6).map(|i| SampleRecord::new(0.0, 0.0, true, 100 + 50 * i, 0.0)));
        RewardGroup::new("p", samples)
    }

    #[test]
    fn dace_accuracy_multiplier_and_efficiency() {
        let mut cfg = EstimatorConfig::for_algorithm(Algorithm::Dace);
        cfg.beta_eff = 1.0;
        let g = two_of_eight();
        let split = dace_split(&g, &cfg).unwrap();
        assert_eq!(split.pass_rate, 0.25);
        let base = group_relative(&g.correct_rewards(), cfg.epsilon);
        for i in 0..8 {
            assert!((split.accuracy[i] - 1.75 * base[i]).abs() < 1e-12);
        }
        // z-scores of negative correct lengths are [+1, -1], times PR
        assert!((split.efficiency[0] - 0.25).abs() < 1e-9);
        assert!((split.efficiency[1] + 0.25).abs() < 1e-9);
        assert!(split.efficiency[2..].iter().all(|&e| e == 0.0));
    }

    #[test]
    fn dace_all_fail_has_no_efficiency_term() {
        let g = RewardGroup::from_binary("p", &[0.0; 4]);
        let split = dace_split(&g, &EstimatorConfig::for_algorithm(Algorithm::Dace)).unwrap();
        assert_eq!(split.efficiency, vec![0.0; 4]);
        assert_eq!(split.accuracy, vec![0.0; 4]);
    }

    #[test]
    fn dace_single_correct_sample_has_zero_efficiency() {
        let g = RewardGroup::from_binary("p", &[1.0, 0.0, 0.0]);
        let split = dace_split(&g, &EstimatorConfig::for_algorithm(Algorithm::Dace)).unwrap();
        assert_eq!(split.efficiency, vec![0.0; 3]);
    }

    #[test]
    fn cag_cost_is_one_sided() {
        let mut cfg = EstimatorConfig::for_algorithm(Algorithm::Cag);
        cfg.beta_base = 1.0;
        let split = cag_split(&two_of_eight(), &cfg).unwrap();
        // mu_L = 400; L = 300 earns nothing, L = 500 costs -0.25 * 0.0625
        assert_eq!(split.efficiency[0], 0.0);
        assert!((split.efficiency[1] + 0.25 * 0.0625).abs() < 1e-12);
        assert!(split.efficiency.iter().all(|&e| e <= 0.0));
    }

    #[test]
    fn dcbe_relative_length_improvement() {
        let mut cfg = EstimatorConfig::for_algorithm(Algorithm::Dcbe);
        cfg.lambda_rli = 1.0;
        let split = dcbe_split(&two_of_eight(), &cfg).unwrap();
        assert!((split.efficiency[0] - 0.015625).abs() < 1e-9);
        assert!((split.efficiency[1] + 0.015625).abs() < 1e-9);
        assert!(split.efficiency[2..].iter().all(|&e| e == 0.0));
        let adv = dcbe_advantage(&two_of_eight(), &cfg).unwrap();
        assert!((adv.values[0] - split.accuracy[0] - split.efficiency[0]).abs() < 1e-15);
    }
}
