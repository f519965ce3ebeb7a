use serde::{Deserialize, Serialize};

use crate::measure::DiscreteMeasure;

use super::config::{FitConfig, Variant};

/// Local and global clusterings produced by a fit (or by the baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilevelState {
    pub variant: Variant,
    /// One quantizer `G_j` per group.
    pub locals: Vec<DiscreteMeasure>,
    /// Global measures `H_1..H_M`.
    pub globals: Vec<DiscreteMeasure>,
    /// Shared atom set `S_K` (sharing variant).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_atoms: Option<Vec<Vec<f64>>>,
    /// Context centroids `θ_1..θ_M` (context variant).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_centroids: Option<Vec<Vec<f64>>>,
    /// Zero-based global cluster of every group.
    pub assignments: Vec<usize>,
    /// Objective after initialization and after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub lambda: f64,
    pub converged: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl MultilevelState {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }

    /// Groups assigned to each global cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.globals.len()];
        for (j, &i) in self.assignments.iter().enumerate() {
            c[i].push(j);
        }
        c
    }
}

/// Serialized fit output: the state plus the configuration that produced it.
/// Worker counts are deliberately not recorded, so runs that differ only in
/// parallelism serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    #[serde(flatten)]
    pub state: MultilevelState,
    pub config: FitConfig,
}

impl FittedModel {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
