//! Surrogate sparse-reward training environment.
//!
//! Tasks are categorical bandits grouped into six buckets. A policy keeps
//! logits and a verbosity scalar per skill, is trained by policy gradient
//! with any estimator, and is scored on held-out task instances.

mod eval;
mod policy;
mod task;
mod trainer;

pub use eval::{
    evaluate_policy, evaluate_policy_monte_carlo, greedy_correct, round1, success_probability,
    weighted_overall, MetricVector, PASS_AT_K,
};
pub use policy::{
    entropy, group_gradient, policy_gradient_update, project_entropy, sample_group, softmax,
    GroupGradient, PolicyState, SampledGroup, ENTROPY_NOISE, MAX_LENGTH,
};
pub use task::{Bucket, Curriculum, TaskSpec};
pub use trainer::{run_training, EntropySchedule, TrainerConfig, TrajectorySummary, ENTROPY_DEADBAND};
