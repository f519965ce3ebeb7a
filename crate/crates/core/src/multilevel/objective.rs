use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{cost_matrix, sq_dist, DiscreteMeasure, GroupedDataset, Order};
use crate::runtime::Runtime;
use crate::transport::{plan_value, solve_plan, OtMode, SinkhornParams, TransportPlan};

use super::config::{FitConfig, LocalScale};
use super::state::MultilevelState;

/// Transport evaluations with a fixed order, mode and Sinkhorn setup.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Evaluator {
    pub order: Order,
    pub mode: OtMode,
    pub sinkhorn: SinkhornParams,
}

impl Evaluator {
    pub fn from_config(config: &FitConfig) -> Self {
        Self {
            order: config.order(),
            mode: config.mode,
            sinkhorn: config.inner.sinkhorn,
        }
    }

    /// Plan with `rows` as the source marginal.
    pub fn plan(&self, rows: &DiscreteMeasure, cols: &DiscreteMeasure) -> Result<TransportPlan> {
        rows.check_dim(cols)?;
        let m = cost_matrix(rows.atoms(), cols.atoms(), self.order)?;
        solve_plan(rows.weights(), cols.weights(), &m, self.mode, &self.sinkhorn)
    }

    /// Transport value (`W_r^r` or its entropic counterpart).
    pub fn value(&self, rows: &DiscreteMeasure, cols: &DiscreteMeasure) -> Result<f64> {
        let plan = self.plan(rows, cols)?;
        let v = plan_value(&plan, rows.weights(), cols.weights(), self.mode);
        if !v.is_finite() {
            return Err(Error::BarycenterDiverged);
        }
        Ok(v)
    }
}

/// Per-group pieces of the objective, cached between steps.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Terms {
    /// `D(P_j, G_j)`.
    pub local: Vec<f64>,
    /// `D(G_j, H_u)` plus the context penalty, indexed `[j][u]`.
    pub cross: Vec<Vec<f64>>,
}

impl Terms {
    pub fn compute(
        eval: &Evaluator,
        empirical: &[DiscreteMeasure],
        state: &MultilevelState,
        contexts: Option<&[Vec<f64>]>,
        runtime: &Runtime,
    ) -> Result<Self> {
        let local = runtime.par_map(empirical, |j, p| eval.value(p, &state.locals[j]))?;
        let cross = runtime.par_map(&state.locals, |j, g| {
            cross_row(eval, g, &state.globals, contexts.map(|c| c[j].as_slice()), state.context_centroids.as_deref())
        })?;
        Ok(Self { local, cross })
    }

    pub fn best(&self, j: usize) -> f64 {
        self.cross[j].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn global_sum(&self) -> f64 {
        (0..self.cross.len()).map(|j| self.best(j)).sum()
    }

    pub fn local_sum(&self, scales: &[f64]) -> f64 {
        self.local.iter().zip(scales).map(|(d, s)| s * d).sum()
    }

    pub fn total(&self, scales: &[f64], lambda: f64) -> f64 {
        let m = self.cross.len() as f64;
        self.local_sum(scales) + lambda / m * self.global_sum()
    }
}

/// `D(G, H_u) + ‖φ − θ_u‖²` for every global measure.
pub(crate) fn cross_row(
    eval: &Evaluator,
    g: &DiscreteMeasure,
    globals: &[DiscreteMeasure],
    context: Option<&[f64]>,
    centroids: Option<&[Vec<f64>]>,
) -> Result<Vec<f64>> {
    globals
        .iter()
        .enumerate()
        .map(|(u, h)| {
            let d = eval.value(g, h)?;
            Ok(match (context, centroids) {
                (Some(phi), Some(theta)) => d + sq_dist(phi, &theta[u]),
                _ => d,
            })
        })
        .collect()
}

/// Index of the smallest entry; the lowest index wins ties.
pub(crate) fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (u, v) in row.iter().enumerate() {
        if *v < row[best] {
            best = u;
        }
    }
    best
}

/// Weight `s_j` of each group's local term.
pub(crate) fn local_scales(dataset: &GroupedDataset, scale: LocalScale) -> Vec<f64> {
    dataset
        .groups()
        .iter()
        .map(|g| match scale {
            LocalScale::Mean => 1.0,
            LocalScale::Count => g.len() as f64,
        })
        .collect()
}

/// Global cluster of every group: the nearest global measure (plus context
/// penalty when centroids are present), lowest index on ties.
pub fn assign_groups(
    locals: &[DiscreteMeasure],
    globals: &[DiscreteMeasure],
    contexts: Option<&[Vec<f64>]>,
    centroids: Option<&[Vec<f64>]>,
    order: Order,
    mode: OtMode,
) -> Result<Vec<usize>> {
    if globals.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let eval = Evaluator {
        order,
        mode,
        sinkhorn: SinkhornParams::default(),
    };
    locals
        .iter()
        .enumerate()
        .map(|(j, g)| Ok(argmin(&cross_row(&eval, g, globals, contexts.map(|c| c[j].as_slice()), centroids)?)))
        .collect()
}

/// `λ` that makes both terms equal at the current state:
/// `(Σ_j min_u D(G_j, H_u) / m) / Σ_j s_j D(P_j, G_j)`.
pub fn lambda_heuristic(local_sum: f64, global_sum: f64, groups: usize) -> Result<f64> {
    let num = global_sum / groups as f64;
    if !(local_sum > 0.0) || !num.is_finite() {
        return Err(Error::DegenerateLambda);
    }
    Ok(num / local_sum)
}

/// Value of the objective split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// `Σ_j s_j D(P_j, G_j)`.
    pub local: f64,
    /// `(1/m) Σ_j min_u D(G_j, H_u)` (with context penalty), before `λ`.
    pub global: f64,
    pub lambda: f64,
    pub total: f64,
}

/// Objective of `state` on `dataset` under `config`, using `state.lambda`.
pub fn objective(dataset: &GroupedDataset, state: &MultilevelState, config: &FitConfig) -> Result<ObjectiveBreakdown> {
    if state.locals.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            left: state.locals.len(),
            right: dataset.len(),
        });
    }
    let contexts = if state.context_centroids.is_some() {
        Some(dataset.contexts().ok_or(Error::MissingContexts)?)
    } else {
        None
    };
    let eval = Evaluator::from_config(config);
    let terms = Terms::compute(&eval, &dataset.empirical_measures(), state, contexts, &Runtime::sequential())?;
    let scales = local_scales(dataset, config.local_scale);
    let local = terms.local_sum(&scales);
    let global = terms.global_sum() / dataset.len() as f64;
    Ok(ObjectiveBreakdown {
        local,
        global,
        lambda: state.lambda,
        total: local + state.lambda * global,
    })
}
