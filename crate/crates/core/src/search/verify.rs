use serde::{Deserialize, Serialize};

use crate::env::{run_training, TaskSpec, TrainerConfig};
use crate::error::{Error, Result};
use crate::proposal::{range_of, Genome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClampRecord {
    pub field: String,
    pub from: f64,
    pub to: f64,
}

/// A candidate that passed every check, with any range clamps applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verified {
    pub genome: Genome,
    pub clamped: Vec<ClampRecord>,
}

fn reject(check: &str, detail: impl Into<String>) -> Error {
    Error::Verification {
        check: check.into(),
        detail: detail.into(),
    }
}

/// Static checks, range clamping and a one-step smoke training run on
/// `tasks`. Rejections name the failing check: `schema`, `finite`,
/// `clip_order`, `estimator`, `trainer_overrides` or `smoke_finite`.
pub fn verify_candidate(genome: &Genome, base: &TrainerConfig, tasks: &[TaskSpec]) -> Result<Verified> {
    let json = serde_json::to_string(genome).map_err(|e| reject("schema", e.to_string()))?;
    let back: Genome = serde_json::from_str(&json).map_err(|e| reject("schema", e.to_string()))?;
    if &back != genome {
        return Err(reject("schema", "genome does not round-trip through JSON"));
    }
    if genome.descriptor.trim().is_empty() {
        return Err(reject("schema", "empty descriptor"));
    }
    if let Some((name, v)) = genome.numeric_values().into_iter().find(|(_, v)| !v.is_finite()) {
        return Err(reject("finite", format!("{name} = {v}")));
    }
    let est = &genome.estimator;
    if est.clip_lo >= est.clip_hi {
        return Err(reject(
            "clip_order",
            format!("clip_lo {} is not below clip_hi {}", est.clip_lo, est.clip_hi),
        ));
    }

    let mut g = genome.clone();
    let mut clamped = Vec::new();
    for (name, v) in genome.out_of_range() {
        let (lo, hi) = range_of(name).expect("declared field");
        let to = v.clamp(lo, hi);
        g.set(name, to).expect("declared field");
        clamped.push(ClampRecord {
            field: name.into(),
            from: v,
            to,
        });
    }
    if !clamped.is_empty() {
        g.descriptor = g.default_descriptor();
    }
    g.estimator.validate().map_err(|e| match &e {
        Error::InvalidConfig { field, .. } if field == "clip_lo" => reject("clip_order", e.to_string()),
        _ => reject("estimator", e.to_string()),
    })?;
    if let Some(s) = &g.trainer_overrides.entropy_schedule {
        s.validate().map_err(|e| reject("trainer_overrides", e.to_string()))?;
    }
    g.validate().map_err(|e| reject("schema", e.to_string()))?;

    let smoke = TrainerConfig {
        steps: 1,
        ..base.clone()
    };
    let (traj, _) = run_training(&g, tasks, &smoke).map_err(|e| reject("smoke_finite", e.to_string()))?;
    if traj.grad_norm_curve.iter().any(|x| !x.is_finite()) {
        return Err(reject("smoke_finite", "non-finite gradient norm"));
    }
    Ok(Verified { genome: g, clamped })
}
