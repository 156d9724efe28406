use rand::Rng;

use super::genome::{range_of, relevant_fields, Genome};
use crate::env::EntropySchedule;
use crate::estimators::Algorithm;

/// Attempts before a mutation gives up and returns a relabelled clone.
pub const MAX_MUTATION_ATTEMPTS: usize = 8;
/// Probability of drawing a resampled algorithm from the pareto references.
const PARETO_BIAS: f64 = 0.5;

/// One editable genome field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MutationField {
    Algorithm,
    EntropySchedule,
    Numeric(&'static str),
}

fn editable(genome: &Genome) -> Vec<MutationField> {
    let mut out = vec![MutationField::Algorithm, MutationField::EntropySchedule];
    out.extend(relevant_fields(genome.algorithm()).iter().map(|&f| MutationField::Numeric(f)));
    out.push(MutationField::Numeric("beta_kl"));
    out.push(MutationField::Numeric("entropy_coeff"));
    out
}

/// Multiplicative perturbation by a log-uniform factor in `[0.5, 2]`,
/// clamped into the field's range. Zero values restart at 5% of the
/// range's far end.
pub fn perturb<R: Rng>(field: &str, value: f64, rng: &mut R) -> f64 {
    let (lo, hi) = range_of(field).unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    if value == 0.0 {
        let far = if hi.abs() >= lo.abs() { hi } else { lo };
        return (0.05 * far).clamp(lo, hi);
    }
    let factor = rng.random_range(0.5f64.ln()..=2.0f64.ln()).exp();
    (value * factor).clamp(lo, hi)
}

fn random_schedule<R: Rng>(rng: &mut R) -> EntropySchedule {
    let h_lo = rng.random_range(0.2..0.6);
    EntropySchedule {
        h_hi: rng.random_range(h_lo..=1.0),
        h_lo,
        anneal_steps: rng.random_range(5..=40),
    }
}

fn resample_algorithm<R: Rng>(current: Algorithm, pareto: &[Genome], rng: &mut R) -> Algorithm {
    let from_refs: Vec<Algorithm> = pareto.iter().map(Genome::algorithm).filter(|&a| a != current).collect();
    if !from_refs.is_empty() && rng.random_bool(PARETO_BIAS) {
        return from_refs[rng.random_range(0..from_refs.len())];
    }
    let others: Vec<Algorithm> = Algorithm::ALL.into_iter().filter(|&a| a != current).collect();
    others[rng.random_range(0..others.len())]
}

/// Applies a single edit to `genome` in place. Returns false when the edit
/// left the genome unchanged.
pub fn apply_mutation<R: Rng>(genome: &mut Genome, field: MutationField, pareto: &[Genome], rng: &mut R) -> bool {
    match field {
        MutationField::Algorithm => {
            genome.estimator.algorithm = resample_algorithm(genome.algorithm(), pareto, rng);
            true
        }
        MutationField::EntropySchedule => {
            let sched = &mut genome.trainer_overrides.entropy_schedule;
            *sched = match sched {
                Some(_) => None,
                None => Some(random_schedule(rng)),
            };
            true
        }
        MutationField::Numeric(name) => {
            let old = genome.get(name).expect("known field");
            let new = perturb(name, old, rng);
            genome.set(name, new).expect("known field");
            new != old
        }
    }
}

/// Edits 1 to 3 fields of `parent`. Categorical fields are resampled,
/// algorithms preferentially from `pareto`; numeric fields are perturbed
/// within their ranges. The result always validates.
pub fn mutate_genome<R: Rng>(parent: &Genome, pareto: &[Genome], rng: &mut R) -> Genome {
    let parent_key = parent.canonical_json();
    for _ in 0..MAX_MUTATION_ATTEMPTS {
        let mut child = parent.clone();
        let edits = rng.random_range(1..=3);
        let mut done: Vec<MutationField> = Vec::new();
        for _ in 0..edits {
            let pool: Vec<MutationField> = editable(&child).into_iter().filter(|f| !done.contains(f)).collect();
            if pool.is_empty() {
                break;
            }
            let field = pool[rng.random_range(0..pool.len())];
            apply_mutation(&mut child, field, pareto, rng);
            done.push(field);
        }
        child.descriptor = child.default_descriptor();
        if child.canonical_json() != parent_key && child.validate().is_ok() {
            return child;
        }
    }
    let mut clone = parent.clone();
    clone.descriptor = format!("{}~{:04x}", parent.descriptor, rng.random::<u16>());
    clone
}
