//! Lineage prioritization: node features, the discounted top-K descendant
//! gain, a Gaussian-process surrogate and the composite parent score.

mod features;
mod gain;
mod gp;
mod score;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{genome_features, FeatureMap, GENOME_DIMS};
pub use gain::{discounted_topk_gain, discounted_topk_gain_at};
pub use gp::{gp_fit, gp_ucb, median_pairwise_distance, GpModel};
pub use score::{fit_archive_model, score_node, select_parents, ScoreBreakdown, Scorer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionWeights {
    pub w_pareto: f64,
    pub w_perf: f64,
    pub w_div: f64,
    pub w_bayes: f64,
    pub gp_noise: f64,
    pub ucb_kappa: f64,
    pub gain_gamma: f64,
    pub gain_beta: f64,
    pub gain_k: usize,
}

impl Default for AcquisitionWeights {
    fn default() -> Self {
        AcquisitionWeights {
            w_pareto: 0.3,
            w_perf: 0.3,
            w_div: 0.2,
            w_bayes: 0.2,
            gp_noise: 1e-4,
            ucb_kappa: 1.0,
            gain_gamma: 0.9,
            gain_beta: 5.0,
            gain_k: 3,
        }
    }
}

impl AcquisitionWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [
            ("w_pareto", self.w_pareto),
            ("w_perf", self.w_perf),
            ("w_div", self.w_div),
            ("w_bayes", self.w_bayes),
        ];
        for (name, v) in w {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be a non-negative finite weight"));
            }
        }
        if !(w.iter().map(|p| p.1).sum::<f64>() > 0.0) {
            return Err(Error::config("w_pareto", "weights must not all be zero"));
        }
        if !(self.gp_noise >= 0.0 && self.gp_noise.is_finite()) {
            return Err(Error::config("gp_noise", "must be non-negative"));
        }
        if !(self.ucb_kappa >= 0.0 && self.ucb_kappa.is_finite()) {
            return Err(Error::config("ucb_kappa", "must be non-negative"));
        }
        if !(self.gain_gamma > 0.0 && self.gain_gamma <= 1.0) {
            return Err(Error::config("gain_gamma", "must lie in (0, 1]"));
        }
        if !(self.gain_beta > 0.0 && self.gain_beta.is_finite()) {
            return Err(Error::config("gain_beta", "must be positive"));
        }
        if self.gain_k < 1 {
            return Err(Error::config("gain_k", "must be at least 1"));
        }
        Ok(())
    }
}
