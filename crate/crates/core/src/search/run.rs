use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::constraint::apply_constraint;
use super::reflect::reflect;
use super::verify::verify_candidate;
use crate::acquisition::{fit_archive_model, select_parents, GpModel};
use crate::archive::{Archive, ArchiveEntry};
use crate::env::{evaluate_policy, run_training, Curriculum, MetricVector, TrainerConfig, TrajectorySummary};
use crate::error::{Error, Result};
use crate::estimators::Algorithm;
use crate::proposal::{
    build_context, build_request, external_proposer_exchange, generate_population, screen_and_rank, Genome,
    Transport,
};
use crate::seed;

/// Proposal rounds per parent: the first try plus one regeneration.
pub const PROPOSAL_ATTEMPTS: u64 = 2;

/// One progress log record; serialized as a JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProgressEvent {
    RootCreated {
        node_id: String,
        overall: f64,
    },
    GenerationStarted {
        generation: u64,
        archive_size: usize,
    },
    ParentsSelected {
        generation: u64,
        parents: Vec<String>,
    },
    ProposerFallback {
        generation: u64,
        parent: String,
        reason: String,
    },
    CandidateRejected {
        generation: u64,
        parent: String,
        descriptor: String,
        reason: String,
    },
    ChildAppended {
        generation: u64,
        parent: String,
        node_id: String,
        descriptor: String,
        overall: f64,
        utility: f64,
    },
    ParentSkipped {
        generation: u64,
        parent: String,
        reason: String,
    },
    GenerationFinished {
        generation: u64,
        best_node: String,
        best_overall: f64,
    },
}

/// Optional external proposer shared by the parallel parent expansions.
pub type Proposer<'a> = Option<&'a (dyn Transport + Sync)>;

fn node_id(index: usize) -> String {
    format!("n{index:04}")
}

fn train_and_evaluate(
    genome: &Genome,
    curriculum: &Curriculum,
    base: &TrainerConfig,
    run_seed: u64,
) -> Result<(TrajectorySummary, MetricVector)> {
    let cfg = TrainerConfig {
        seed: seed::derive(run_seed, &[seed::key(&genome.descriptor)]),
        ..base.clone()
    };
    let (traj, policy) = run_training(genome, &curriculum.train, &cfg)?;
    Ok((traj, evaluate_policy(&policy, &curriculum.eval)))
}

/// Archive holding only the trained and evaluated GRPO baseline as `n0000`.
pub fn bootstrap(cfg: &RunConfig, curriculum: &Curriculum) -> Result<Archive> {
    let genome = Genome::baseline(Algorithm::Grpo);
    let (trajectory, metrics) = train_and_evaluate(&genome, curriculum, &cfg.trainer, cfg.seed)?;
    let entry = ArchiveEntry {
        node_id: node_id(0),
        parent_id: None,
        utility: apply_constraint(&metrics, &metrics, cfg.constraint, &cfg.compression),
        reflection: reflect(None, &metrics, &trajectory),
        genome,
        trajectory,
        metrics,
        created_at: 0,
        depth: 0,
    };
    let mut archive = Archive::new();
    archive.append(entry)?;
    Ok(archive)
}

struct Draft {
    parent: String,
    genome: Genome,
    trajectory: TrajectorySummary,
    metrics: MetricVector,
}

struct Expansion<'a> {
    archive: &'a Archive,
    cfg: &'a RunConfig,
    curriculum: &'a Curriculum,
    model: Option<&'a GpModel>,
    proposer: Proposer<'a>,
    generation: u64,
}

impl Expansion<'_> {
    fn candidates(&self, parent: &ArchiveEntry, attempt: u64, events: &mut Vec<ProgressEvent>) -> Result<Vec<Genome>> {
        let gen = self.generation;
        let pseed = seed::derive(self.cfg.seed, &[gen, seed::key(&parent.node_id), attempt]);
        let refs = build_context(self.archive, &parent.node_id, &self.cfg.context, pseed)?;
        if let Some(t) = self.proposer {
            let req = build_request(self.archive, &parent.node_id, &refs, self.cfg.constraint, self.cfg.population)?;
            match external_proposer_exchange(t, &req) {
                Ok(gs) => return Ok(gs),
                Err(e) => events.push(ProgressEvent::ProposerFallback {
                    generation: gen,
                    parent: parent.node_id.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        let pareto: Vec<Genome> = refs
            .pareto_refs
            .iter()
            .map(|id| self.archive.get(id).map(|e| e.genome.clone()))
            .collect::<Result<_>>()?;
        Ok(generate_population(&parent.genome, &pareto, self.archive, self.cfg.population, pseed))
    }

    fn expand(&self, parent_id: &str) -> (Option<Draft>, Vec<ProgressEvent>) {
        let mut events = Vec::new();
        let gen = self.generation;
        let parent = self.archive.get(parent_id).expect("selected parent exists");
        let rejected = |events: &mut Vec<ProgressEvent>, descriptor: &str, reason: String| {
            events.push(ProgressEvent::CandidateRejected {
                generation: gen,
                parent: parent_id.to_string(),
                descriptor: descriptor.to_string(),
                reason,
            })
        };
        for attempt in 0..PROPOSAL_ATTEMPTS {
            let candidates = match self.candidates(parent, attempt, &mut events) {
                Ok(c) => c,
                Err(e) => {
                    rejected(&mut events, "", e.to_string());
                    continue;
                }
            };
            let screening =
                match screen_and_rank(&candidates, self.archive, parent_id, self.model, &self.cfg.acquisition) {
                    Ok(s) => s,
                    Err(e) => {
                        rejected(&mut events, "", e.to_string());
                        continue;
                    }
                };
            for (d, reason) in screening.rejected {
                rejected(&mut events, &d, reason);
            }
            let head = &screening.ranked[0].genome;
            let verified = match verify_candidate(head, &self.cfg.trainer, &self.curriculum.train) {
                Ok(v) => v,
                Err(e) => {
                    rejected(&mut events, &head.descriptor, e.to_string());
                    continue;
                }
            };
            match train_and_evaluate(&verified.genome, self.curriculum, &self.cfg.trainer, self.cfg.seed) {
                Ok((trajectory, metrics)) => {
                    return (
                        Some(Draft {
                            parent: parent_id.to_string(),
                            genome: verified.genome,
                            trajectory,
                            metrics,
                        }),
                        events,
                    )
                }
                Err(e) => rejected(&mut events, &verified.genome.descriptor, e.to_string()),
            }
        }
        events.push(ProgressEvent::ParentSkipped {
            generation: gen,
            parent: parent_id.to_string(),
            reason: format!("no candidate survived {PROPOSAL_ATTEMPTS} proposal rounds"),
        });
        (None, events)
    }
}

/// One generation: select parents, expand them in parallel, then append
/// their children in parent order. Returns the number of entries added.
pub fn run_iteration(
    archive: &mut Archive,
    cfg: &RunConfig,
    curriculum: &Curriculum,
    generation: u64,
    proposer: Proposer<'_>,
    log: &mut dyn FnMut(&ProgressEvent),
) -> Result<usize> {
    let root = archive
        .root()
        .cloned()
        .ok_or_else(|| Error::invalid("run_iteration needs an archive with a root"))?;
    log(&ProgressEvent::GenerationStarted {
        generation,
        archive_size: archive.len(),
    });
    let model = fit_archive_model(archive, &cfg.acquisition)?;
    let parents = select_parents(archive, model.as_ref(), &cfg.acquisition, cfg.parents_per_round);
    log(&ProgressEvent::ParentsSelected {
        generation,
        parents: parents.clone(),
    });

    let expansion = Expansion {
        archive,
        cfg,
        curriculum,
        model: model.as_ref(),
        proposer,
        generation,
    };
    let results: Vec<(Option<Draft>, Vec<ProgressEvent>)> = parents.par_iter().map(|p| expansion.expand(p)).collect();

    let mut added = 0;
    for (draft, events) in results {
        events.iter().for_each(&mut *log);
        let Some(d) = draft else { continue };
        if archive.contains_genome(&d.genome) {
            log(&ProgressEvent::ParentSkipped {
                generation,
                parent: d.parent,
                reason: format!("child `{}` duplicates a sibling from this round", d.genome.descriptor),
            });
            continue;
        }
        let parent = archive.get(&d.parent)?.clone();
        let entry = ArchiveEntry {
            node_id: node_id(archive.len()),
            parent_id: Some(d.parent.clone()),
            utility: apply_constraint(&d.metrics, &root.metrics, cfg.constraint, &cfg.compression),
            reflection: reflect(Some(&parent), &d.metrics, &d.trajectory),
            genome: d.genome,
            trajectory: d.trajectory,
            metrics: d.metrics,
            created_at: generation,
            depth: parent.depth + 1,
        };
        let event = ProgressEvent::ChildAppended {
            generation,
            parent: d.parent,
            node_id: entry.node_id.clone(),
            descriptor: entry.genome.descriptor.clone(),
            overall: entry.metrics.overall,
            utility: entry.utility,
        };
        archive.append(entry)?;
        log(&event);
        added += 1;
    }

    let best = archive
        .entries()
        .iter()
        .fold(&root, |b, e| if e.metrics.overall > b.metrics.overall { e } else { b });
    log(&ProgressEvent::GenerationFinished {
        generation,
        best_node: best.node_id.clone(),
        best_overall: best.metrics.overall,
    });
    Ok(added)
}

/// Continues `archive` up to `cfg.generations`, starting after the latest
/// generation already recorded. Saves after every generation when an
/// archive path is configured.
pub fn resume(
    mut archive: Archive,
    cfg: &RunConfig,
    curriculum: &Curriculum,
    proposer: Proposer<'_>,
    log: &mut dyn FnMut(&ProgressEvent),
) -> Result<Archive> {
    cfg.validate()?;
    let start = archive.entries().iter().map(|e| e.created_at).max().unwrap_or(0) + 1;
    for generation in start..=cfg.generations {
        run_iteration(&mut archive, cfg, curriculum, generation, proposer, log)?;
        if let Some(path) = &cfg.archive_path {
            archive.save(path)?;
        }
    }
    Ok(archive)
}

/// Full run: bootstrap the baseline root, then `cfg.generations` rounds.
pub fn run(
    cfg: &RunConfig,
    curriculum: &Curriculum,
    proposer: Proposer<'_>,
    log: &mut dyn FnMut(&ProgressEvent),
) -> Result<Archive> {
    cfg.validate()?;
    curriculum.validate()?;
    let archive = bootstrap(cfg, curriculum)?;
    let root = archive.root().expect("bootstrapped root");
    log(&ProgressEvent::RootCreated {
        node_id: root.node_id.clone(),
        overall: root.metrics.overall,
    });
    if let Some(path) = &cfg.archive_path {
        archive.save(path)?;
    }
    resume(archive, cfg, curriculum, proposer, log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(generations: u64, parents: usize, population: usize) -> RunConfig {
        RunConfig {
            generations,
            parents_per_round: parents,
            population,
            trainer: TrainerConfig {
                steps: 5,
                ..TrainerConfig::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn single_lineage_chain() {
        let cfg = small(2, 1, 1);
        let c = Curriculum::standard(cfg.seed);
        let mut events = Vec::new();
        let a = run(&cfg, &c, None, &mut |e| events.push(e.clone())).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.root().unwrap().node_id, "n0000");
        let depth = a.entries().iter().map(|e| e.depth).max().unwrap();
        assert!((1..=2).contains(&depth));
        assert_eq!(a.entries()[2].created_at, 2);
        assert!(matches!(events[0], ProgressEvent::RootCreated { .. }));
    }

    #[test]
    fn iteration_is_append_only() {
        let cfg = small(1, 2, 2);
        let c = Curriculum::standard(cfg.seed);
        let mut a = bootstrap(&cfg, &c).unwrap();
        let before = a.entries().to_vec();
        run_iteration(&mut a, &cfg, &c, 1, None, &mut |_| {}).unwrap();
        assert_eq!(&a.entries()[..before.len()], &before[..]);
    }
}
