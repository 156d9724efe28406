use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::archive::{MetricKey, MetricSource};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    #[default]
    None,
    LengthCompression,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::None => "none",
            Constraint::LengthCompression => "length_compression",
        })
    }
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Constraint::None),
            "length_compression" | "compression" => Ok(Constraint::LengthCompression),
            _ => Err(Error::invalid(format!("unknown constraint `{s}`"))),
        }
    }
}

/// Coefficients of the length-compression utility, in Overall points per
/// unit of length ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressionCoefficients {
    pub penalty: f64,
    pub bonus: f64,
    /// The bonus applies only within this many points of the baseline.
    pub tolerance: f64,
}

impl Default for CompressionCoefficients {
    fn default() -> Self {
        CompressionCoefficients {
            penalty: 5.0,
            bonus: 5.0,
            tolerance: 1.0,
        }
    }
}

impl CompressionCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("penalty", self.penalty), ("bonus", self.bonus), ("tolerance", self.tolerance)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Scalar selection utility of `metrics` relative to `baseline`. Without a
/// constraint this is the Overall score. Under length compression, longer
/// outputs than the baseline are penalized and shorter ones rewarded as
/// long as Overall stays within tolerance of the baseline. A baseline
/// without a positive mean length leaves Overall unchanged.
pub fn apply_constraint<A: MetricSource, B: MetricSource>(
    metrics: &A,
    baseline: &B,
    constraint: Constraint,
    coeffs: &CompressionCoefficients,
) -> f64 {
    let overall = metrics.metric(MetricKey::Overall).unwrap_or(f64::NAN);
    match constraint {
        Constraint::None => overall,
        Constraint::LengthCompression => {
            let ratio = match (metrics.metric(MetricKey::MeanLength), baseline.metric(MetricKey::MeanLength)) {
                (Some(l), Some(b)) if b > 0.0 => l / b,
                _ => return overall,
            };
            let base_overall = baseline.metric(MetricKey::Overall).unwrap_or(f64::NEG_INFINITY);
            let mut u = overall - coeffs.penalty * (ratio - 1.0).max(0.0);
            if overall >= base_overall - coeffs.tolerance {
                u += coeffs.bonus * (1.0 - ratio).max(0.0);
            }
            u
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MetricVector;

    fn mv(overall: f64, len: f64) -> MetricVector {
        MetricVector::new([overall; 6], len)
    }

    #[test]
    fn identity_without_constraint() {
        let c = CompressionCoefficients::default();
        let m = mv(52.5, 300.0);
        assert_eq!(apply_constraint(&m, &mv(47.8, 473.6), Constraint::None, &c), m.overall);
    }

    #[test]
    fn compression_prefers_short_and_accurate() {
        let c = CompressionCoefficients::default();
        let base = mv(47.8, 473.6);
        let dace = apply_constraint(&mv(51.7, 335.7), &base, Constraint::LengthCompression, &c);
        let cas = apply_constraint(&mv(43.1, 1092.3), &base, Constraint::LengthCompression, &c);
        assert!(dace > cas);
        assert!((dace - (51.7 + 5.0 * (1.0 - 335.7 / 473.6))).abs() < 1e-9);
    }

    #[test]
    fn bonus_gated_by_tolerance() {
        let c = CompressionCoefficients::default();
        let base = mv(47.8, 400.0);
        let low = mv(40.0, 200.0);
        assert_eq!(apply_constraint(&low, &base, Constraint::LengthCompression, &c), low.overall);
    }

    #[test]
    fn parses_names() {
        assert_eq!("length-compression".parse::<Constraint>().unwrap(), Constraint::LengthCompression);
        assert!("speed".parse::<Constraint>().is_err());
    }
}
