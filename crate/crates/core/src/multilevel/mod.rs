//! Multilevel clustering: each group is quantized by a local measure `G_j`
//! and the local measures are clustered into `M` global measures.
//!
//! All variants minimize
//! `Σ_j s_j D(P_j, G_j) + (λ/m) Σ_j min_u D(G_j, H_u)`
//! by block coordinate descent. Every step is evaluated against the cached
//! terms and kept only when it lowers its block, so the objective trace is
//! non-increasing.

mod config;
mod equivalence;
mod fit;
mod objective;
mod state;

pub use config::{FitConfig, Lambda, LocalScale, Variant};
pub use equivalence::{equivalence_check, random_tiny_instance, EquivalenceReport, MAX_CLUSTERS, MAX_GROUPS};
pub use fit::{fit, fit_from, fit_observed, initialize, timed_fit, IterationEvent};
pub use objective::{assign_groups, lambda_heuristic, objective, ObjectiveBreakdown};
pub use state::{FittedModel, MultilevelState};
