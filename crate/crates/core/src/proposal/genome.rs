use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{EntropySchedule, TrainerConfig};
use crate::error::{Error, Result};
use crate::estimators::{Algorithm, EstimatorConfig};

/// Declared search range for every numeric genome field.
pub const RANGES: [(&str, f64, f64); 19] = [
    ("epsilon", 0.0, 1e-2),
    ("sigma_min", 0.0, 1.0),
    ("sigma_floor", 0.0, 1.0),
    ("clip_lo", -10.0, 0.0),
    ("clip_hi", 0.0, 10.0),
    ("alpha_bayes", 0.0, 10.0),
    ("beta_bayes", 0.0, 10.0),
    ("a_floor", -10.0, 0.0),
    ("alpha_uniform", 0.0, 1.0),
    ("lambda_len", 0.0, 4.0),
    ("lambda_fmt", 0.0, 4.0),
    ("alpha_anchor", 0.0, 1.0),
    ("sigma_fixed", 0.0, 10.0),
    ("alpha_diff_weight", 0.0, 4.0),
    ("beta_eff", 0.0, 4.0),
    ("beta_base", 0.0, 4.0),
    ("lambda_rli", 0.0, 4.0),
    ("beta_kl", 0.0, 1.0),
    ("entropy_coeff", 0.0, 1.0),
];

pub fn range_of(field: &str) -> Option<(f64, f64)> {
    RANGES
        .iter()
        .find(|(name, _, _)| *name == field)
        .map(|&(_, lo, hi)| (lo, hi))
}

/// The mechanism an estimator uses along each design axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mechanism {
    pub baseline: &'static str,
    pub scaling: &'static str,
    pub masking: &'static str,
    pub failure: &'static str,
    pub length: &'static str,
}

pub fn mechanism(algorithm: Algorithm) -> Mechanism {
    let m = |baseline, scaling, masking, failure, length| Mechanism {
        baseline,
        scaling,
        masking,
        failure,
        length,
    };
    match algorithm {
        Algorithm::Grpo => m("group", "empirical", "none", "none", "none"),
        Algorithm::Bn => m("group", "batch_rms", "none", "none", "none"),
        Algorithm::Av => m("group", "analytic", "none", "none", "none"),
        Algorithm::VmAv => m("valid_subset", "analytic", "validity", "floor", "ratio_negative"),
        Algorithm::Msa => m("regime", "regime", "none", "none", "ratio_power"),
        Algorithm::Fa => m("group", "empirical", "none", "constant", "none"),
        Algorithm::Dfr => m("group", "empirical", "none", "entropy", "none"),
        Algorithm::Sa => m("dual_anchor", "fixed", "none", "none", "none"),
        Algorithm::Dace => m("group", "empirical", "none", "none", "zscore"),
        Algorithm::Cag => m("group", "empirical", "none", "none", "cost"),
        Algorithm::Dcbe => m("group", "empirical", "none", "none", "relative"),
    }
}

/// Estimator fields each algorithm actually reads.
pub fn relevant_fields(algorithm: Algorithm) -> &'static [&'static str] {
    match algorithm {
        Algorithm::Grpo => &["epsilon"],
        Algorithm::Bn => &["epsilon", "clip_lo", "clip_hi"],
        Algorithm::Av => &["sigma_min"],
        Algorithm::VmAv => &["alpha_bayes", "beta_bayes", "sigma_floor", "a_floor"],
        Algorithm::Msa => &["epsilon", "alpha_uniform", "lambda_len"],
        Algorithm::Fa => &["epsilon", "clip_lo", "clip_hi"],
        Algorithm::Dfr => &["epsilon", "lambda_fmt"],
        Algorithm::Sa => &["alpha_anchor", "sigma_fixed"],
        Algorithm::Dace => &["epsilon", "alpha_diff_weight", "beta_eff"],
        Algorithm::Cag => &["epsilon", "beta_base"],
        Algorithm::Dcbe => &["epsilon", "lambda_rli"],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerOverrides {
    pub beta_kl: f64,
    pub entropy_coeff: f64,
    pub entropy_schedule: Option<EntropySchedule>,
}

impl Default for TrainerOverrides {
    fn default() -> Self {
        let base = TrainerConfig::default();
        TrainerOverrides {
            beta_kl: base.beta_kl,
            entropy_coeff: base.entropy_coeff,
            entropy_schedule: base.entropy_target_schedule,
        }
    }
}

/// One candidate algorithm: estimator section plus trainer overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Genome {
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub trainer_overrides: TrainerOverrides,
    /// Short machine name; recomputed from content when empty.
    #[serde(default)]
    pub descriptor: String,
}

#[derive(Serialize)]
struct CanonicalView<'a> {
    estimator: &'a EstimatorConfig,
    trainer_overrides: &'a TrainerOverrides,
}

impl Genome {
    pub fn new(estimator: EstimatorConfig, trainer_overrides: TrainerOverrides) -> Self {
        let mut g = Genome {
            estimator,
            trainer_overrides,
            descriptor: String::new(),
        };
        g.descriptor = g.default_descriptor();
        g
    }

    /// Default-parameter genome for `algorithm`.
    pub fn baseline(algorithm: Algorithm) -> Self {
        Genome::new(EstimatorConfig::for_algorithm(algorithm), TrainerOverrides::default())
    }

    pub fn algorithm(&self) -> Algorithm {
        self.estimator.algorithm
    }

    /// JSON of the content fields, excluding the descriptor. Two genomes are
    /// the same candidate exactly when these strings are equal.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&CanonicalView {
            estimator: &self.estimator,
            trainer_overrides: &self.trainer_overrides,
        })
        .expect("genome serializes")
    }

    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().take(4).map(|b| format!("{b:02x}")).collect()
    }

    pub fn default_descriptor(&self) -> String {
        let ent = if self.trainer_overrides.entropy_schedule.is_some() {
            "+ent"
        } else {
            ""
        };
        format!("{}{ent}-{}", self.algorithm(), self.content_hash())
    }

    /// Fills an empty descriptor from content.
    pub fn normalized(mut self) -> Self {
        if self.descriptor.trim().is_empty() {
            self.descriptor = self.default_descriptor();
        }
        self
    }

    pub fn get(&self, field: &str) -> Option<f64> {
        match field {
            "beta_kl" => Some(self.trainer_overrides.beta_kl),
            "entropy_coeff" => Some(self.trainer_overrides.entropy_coeff),
            _ => self.estimator.get(field),
        }
    }

    pub fn set(&mut self, field: &str, value: f64) -> Result<()> {
        match field {
            "beta_kl" => self.trainer_overrides.beta_kl = value,
            "entropy_coeff" => self.trainer_overrides.entropy_coeff = value,
            _ => self.estimator.set(field, value)?,
        }
        Ok(())
    }

    /// Every numeric field with its current value, in [`RANGES`] order.
    pub fn numeric_values(&self) -> Vec<(&'static str, f64)> {
        RANGES
            .iter()
            .map(|&(name, _, _)| (name, self.get(name).unwrap()))
            .collect()
    }

    /// Fields outside their declared range, with the violating value.
    pub fn out_of_range(&self) -> Vec<(&'static str, f64)> {
        RANGES
            .iter()
            .filter_map(|&(name, lo, hi)| {
                let v = self.get(name).unwrap();
                (!(lo..=hi).contains(&v)).then_some((name, v))
            })
            .collect()
    }

    /// Estimator invariants, trainer override invariants and declared ranges.
    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        let o = &self.trainer_overrides;
        if !(o.beta_kl.is_finite() && o.entropy_coeff.is_finite()) {
            return Err(Error::config("trainer_overrides", "must be finite"));
        }
        if let Some(s) = &o.entropy_schedule {
            s.validate()?;
        }
        if let Some(&(name, v)) = self.out_of_range().first() {
            let (lo, hi) = range_of(name).unwrap();
            return Err(Error::config(name, format!("{v} outside [{lo}, {hi}]")));
        }
        if self.descriptor.trim().is_empty() {
            return Err(Error::config("descriptor", "must not be empty"));
        }
        Ok(())
    }

    /// `base` with this genome's trainer overrides applied.
    pub fn trainer_config(&self, base: &TrainerConfig) -> TrainerConfig {
        TrainerConfig {
            beta_kl: self.trainer_overrides.beta_kl,
            entropy_coeff: self.trainer_overrides.entropy_coeff,
            entropy_target_schedule: self.trainer_overrides.entropy_schedule.clone(),
            ..base.clone()
        }
    }
}

/// Hamming distance over mechanism axes and schedule presence plus range
/// normalized absolute differences over numeric fields, averaged over all
/// components. Lies in `[0, 1]`.
pub fn genome_distance(a: &Genome, b: &Genome) -> f64 {
    let (ma, mb) = (mechanism(a.algorithm()), mechanism(b.algorithm()));
    let categorical = [
        ma.baseline != mb.baseline,
        ma.scaling != mb.scaling,
        ma.masking != mb.masking,
        ma.failure != mb.failure,
        ma.length != mb.length,
        a.trainer_overrides.entropy_schedule.is_some() != b.trainer_overrides.entropy_schedule.is_some(),
    ];
    let mut total: f64 = categorical.iter().map(|&d| if d { 1.0 } else { 0.0 }).sum();
    for &(name, lo, hi) in &RANGES {
        let d = (a.get(name).unwrap() - b.get(name).unwrap()).abs() / (hi - lo);
        total += d.min(1.0);
    }
    total / (categorical.len() + RANGES.len()) as f64
}
