//! Genealogical archive: append-only storage, lineage queries and the
//! depth, retention and trade-off analytics.

mod analytics;
mod dot;
mod lineage;
mod store;

pub use analytics::{
    best_descendant, depth_frontier, dominates, front_ranks, length_ratio, parent_retention_report,
    pareto_frontier, FrontierRow, MetricKey, MetricSource, ParentRetention, RetentionReport,
    RetentionRound, RoundRetention, Sense,
};
pub use dot::to_dot;
pub use lineage::{LineageNode, LineageTree};
pub use store::{Archive, ArchiveEntry};
