//! The discovery loop: verification, reflection, constrained utility and
//! run orchestration.

mod config;
mod constraint;
mod reflect;
mod run;
mod verify;

pub use config::RunConfig;
pub use constraint::{apply_constraint, CompressionCoefficients, Constraint};
pub use reflect::{
    reflect, Reflection, ReflectionTag, ALL_FAIL_STAGNATION, ENTROPY_COLLAPSE_FRACTION, INSTABILITY_FACTOR,
    LENGTH_DRIFT, REWARD_DELTA,
};
pub use run::{bootstrap, resume, run, run_iteration, ProgressEvent, Proposer, PROPOSAL_ATTEMPTS};
pub use verify::{verify_candidate, ClampRecord, Verified};
