//! Closed-loop discovery of group-relative advantage estimators.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod archive;
pub mod env;
pub mod error;
pub mod estimators;
pub mod fixtures;
pub mod proposal;
pub mod search;
pub mod seed;
#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
pub use acquisition::AcquisitionWeights;
pub use archive::{Archive, ArchiveEntry, LineageTree, MetricKey};
pub use env::{Curriculum, MetricVector, TrainerConfig, TrajectorySummary};
pub use estimators::{compute_advantages, AdvantageVector, Algorithm, EstimatorConfig, RewardGroup, SampleRecord};
pub use fixtures::PaperResults;
pub use proposal::Genome;
pub use search::{Constraint, Reflection, RunConfig};
