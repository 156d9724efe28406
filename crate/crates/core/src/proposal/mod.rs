//! Phase I proposal operator: genome representation, tiered reference
//! context, mutation-based population generation, screening, and an
//! optional bridge to an external proposer.

mod context;
mod external;
mod genome;
mod mutate;
mod population;

pub use context::{build_context, ContextSizes, ReferenceSet};
pub use external::{
    build_request, external_proposer_exchange, validate_proposals, ProposalRequest, ProposalResponse,
    ProposerEndpoint, ReferenceDoc, Transport, MAX_ROUND_TRIPS, PROPOSER_ENV,
};
pub use genome::{
    genome_distance, mechanism, range_of, relevant_fields, Genome, Mechanism, TrainerOverrides, RANGES,
};
pub use mutate::{apply_mutation, mutate_genome, perturb, MutationField, MAX_MUTATION_ATTEMPTS};
pub use population::{generate_population, screen_and_rank, RankedCandidate, Screening};
