use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::archive::{ArchiveEntry, MetricKey};
use crate::env::{Bucket, MetricVector, TrajectorySummary};

/// Final entropy below this fraction of the initial entropy is a collapse.
pub const ENTROPY_COLLAPSE_FRACTION: f64 = 0.1;
/// Final all-fail fraction above this is stagnation.
pub const ALL_FAIL_STAGNATION: f64 = 0.5;
/// Overall change, in points, that counts as a gain or regression.
pub const REWARD_DELTA: f64 = 0.5;
/// Relative mean-length change that counts as drift.
pub const LENGTH_DRIFT: f64 = 0.2;
/// Gradient-norm spikes above this multiple of the median are instability.
pub const INSTABILITY_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionTag {
    EntropyCollapse,
    AllFailStagnation,
    RewardGain,
    RewardRegression,
    LengthDriftUp,
    LengthDriftDown,
    Instability,
}

impl ReflectionTag {
    fn phrase(self) -> &'static str {
        match self {
            ReflectionTag::EntropyCollapse => "policy entropy collapsed",
            ReflectionTag::AllFailStagnation => "most groups stayed all-fail",
            ReflectionTag::RewardGain => "overall improved over the parent",
            ReflectionTag::RewardRegression => "overall regressed from the parent",
            ReflectionTag::LengthDriftUp => "responses grew longer",
            ReflectionTag::LengthDriftDown => "responses grew shorter",
            ReflectionTag::Instability => "gradient norms spiked",
        }
    }
}

/// Structured diagnosis of one child relative to its parent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub tags: BTreeSet<ReflectionTag>,
    /// Child minus parent, keyed by metric name.
    pub deltas: BTreeMap<String, f64>,
    pub note: String,
}

impl Reflection {
    pub fn has(&self, tag: ReflectionTag) -> bool {
        self.tags.contains(&tag)
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn note_for(tags: &BTreeSet<ReflectionTag>, overall_delta: Option<f64>) -> String {
    if tags.is_empty() {
        return match overall_delta {
            Some(d) => format!("No notable change ({d:+.1} overall)."),
            None => "Baseline run with no anomalies.".into(),
        };
    }
    let phrases: Vec<&str> = tags.iter().map(|t| t.phrase()).collect();
    let mut s = phrases.join("; ");
    s[..1].make_ascii_uppercase();
    match overall_delta {
        Some(d) => format!("{s} ({d:+.1} overall)."),
        None => format!("{s}."),
    }
}

/// Rule-based tags and metric deltas. With no parent (the root) the deltas
/// are empty and only trajectory-intrinsic tags can fire.
pub fn reflect(
    parent: Option<&ArchiveEntry>,
    metrics: &MetricVector,
    trajectory: &TrajectorySummary,
) -> Reflection {
    let mut tags = BTreeSet::new();

    if let (Some(&h0), Some(&h1)) = (trajectory.entropy_curve.first(), trajectory.entropy_curve.last()) {
        if h1 < ENTROPY_COLLAPSE_FRACTION * h0 {
            tags.insert(ReflectionTag::EntropyCollapse);
        }
    }
    if trajectory
        .all_fail_fraction_curve
        .last()
        .is_some_and(|&f| f > ALL_FAIL_STAGNATION)
    {
        tags.insert(ReflectionTag::AllFailStagnation);
    }
    if !trajectory.grad_norm_curve.is_empty() {
        let max = trajectory.grad_norm_curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > INSTABILITY_FACTOR * median(&trajectory.grad_norm_curve) {
            tags.insert(ReflectionTag::Instability);
        }
    }

    let mut deltas = BTreeMap::new();
    let mut overall_delta = None;
    if let Some(p) = parent {
        let pm = &p.metrics;
        let d = metrics.overall - pm.overall;
        overall_delta = Some(d);
        deltas.insert(MetricKey::Overall.name(), d);
        deltas.insert(MetricKey::MeanLength.name(), metrics.mean_length - pm.mean_length);
        for b in Bucket::ALL {
            deltas.insert(MetricKey::Bucket(b).name(), metrics.score(b) - pm.score(b));
        }
        if d >= REWARD_DELTA {
            tags.insert(ReflectionTag::RewardGain);
        } else if d <= -REWARD_DELTA {
            tags.insert(ReflectionTag::RewardRegression);
        }
        if pm.mean_length > 0.0 {
            let ratio = metrics.mean_length / pm.mean_length;
            if ratio > 1.0 + LENGTH_DRIFT {
                tags.insert(ReflectionTag::LengthDriftUp);
            } else if ratio < 1.0 - LENGTH_DRIFT {
                tags.insert(ReflectionTag::LengthDriftDown);
            }
        }
    }

    let note = note_for(&tags, overall_delta);
    Reflection { tags, deltas, note }
}
