use std::time::{Duration, Instant};

use crate::barycenter::{fixed_support_barycenter, free_support_barycenter, support_bound, truncate_heaviest, BarycenterProblem, WEIGHT_FLOOR};
use crate::error::{Error, Result};
use crate::kmeans::{distinct_count, lloyd_kmeans, stage_seed, three_stage_kmeans, KMeansInit, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::measure::{sq_dist, DiscreteMeasure, GroupedDataset};
use crate::runtime::Runtime;

use super::config::{FitConfig, Lambda, Variant};
use super::objective::{argmin, cross_row, lambda_heuristic, local_scales, Evaluator, Terms};
use super::state::MultilevelState;

const SHARED_SEED: u32 = 0x5311;
const CONTEXT_SEED: u32 = 0x5312;

/// Progress report handed to an observer after every outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationEvent {
    pub iteration: usize,
    pub objective: f64,
    pub elapsed: Duration,
}

/// Fits `config.variant` to `dataset`.
pub fn fit(dataset: &GroupedDataset, config: &FitConfig, runtime: &Runtime) -> Result<MultilevelState> {
    fit_observed(dataset, config, runtime, &mut |_| {})
}

/// Like [`fit`], reporting every outer iteration to `observer`.
pub fn fit_observed(
    dataset: &GroupedDataset,
    config: &FitConfig,
    runtime: &Runtime,
    observer: &mut dyn FnMut(&IterationEvent),
) -> Result<MultilevelState> {
    config.validate()?;
    let init = initialize(dataset, config, runtime)?;
    if config.variant == Variant::ThreeStage {
        return Ok(init);
    }
    run(dataset, config, runtime, init, true, observer)
}

/// Continues from a previous state (same variant), e.g. a warm start.
pub fn fit_from(dataset: &GroupedDataset, config: &FitConfig, runtime: &Runtime, state: MultilevelState) -> Result<MultilevelState> {
    config.validate()?;
    if state.variant != config.variant {
        return Err(Error::InvalidParameter(format!(
            "state was fitted with {}, config asks for {}",
            state.variant, config.variant
        )));
    }
    if state.locals.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            left: state.locals.len(),
            right: dataset.len(),
        });
    }
    let fresh = state.objective_trace.is_empty();
    run(dataset, config, runtime, state, fresh, &mut |_| {})
}

/// Fit plus the wall-clock seconds of every outer iteration.
pub fn timed_fit(dataset: &GroupedDataset, config: &FitConfig, runtime: &Runtime) -> Result<(MultilevelState, Vec<f64>)> {
    let mut seconds = Vec::new();
    let state = fit_observed(dataset, config, runtime, &mut |e| seconds.push(e.elapsed.as_secs_f64()))?;
    Ok((state, seconds))
}

/// Starting state of every variant.
pub fn initialize(dataset: &GroupedDataset, config: &FitConfig, runtime: &Runtime) -> Result<MultilevelState> {
    if config.variant == Variant::Mwmc && dataset.contexts().is_none() {
        return Err(Error::MissingContexts);
    }
    let mut state = three_stage_kmeans(
        dataset,
        config.local_atoms,
        config.global_clusters,
        config.support_cap,
        config.seed,
        runtime,
    )?;
    state.variant = config.variant;
    match config.variant {
        Variant::Mwms => {
            let pooled = dataset.pooled_points();
            let k = config.shared_atoms.min(distinct_count(&pooled));
            if k < config.shared_atoms {
                state.warnings.push(format!("only {k} distinct points; using K = {k}"));
            }
            let km = lloyd_kmeans(
                &pooled,
                k,
                &KMeansInit::PlusPlus {
                    seed: stage_seed(config.seed, SHARED_SEED, 0),
                },
                DEFAULT_MAX_ITER,
                DEFAULT_TOL,
            )?;
            let mut offset = 0;
            let mut locals = Vec::with_capacity(dataset.len());
            for g in dataset.groups() {
                let mut mass = vec![0.0; k];
                for l in &km.labels[offset..offset + g.len()] {
                    mass[*l] += 1.0;
                }
                offset += g.len();
                locals.push(DiscreteMeasure::from_masses(km.centers.clone(), mass)?);
            }
            state.locals = locals;
            state.shared_atoms = Some(km.centers);
        }
        Variant::Mwmc => {
            let contexts = dataset.contexts().ok_or(Error::MissingContexts)?;
            let k = config.global_clusters.min(distinct_count(contexts));
            let km = lloyd_kmeans(
                contexts,
                k,
                &KMeansInit::PlusPlus {
                    seed: stage_seed(config.seed, CONTEXT_SEED, 0),
                },
                DEFAULT_MAX_ITER,
                DEFAULT_TOL,
            )?;
            // With fewer distinct contexts than clusters, centroids repeat.
            state.context_centroids = Some((0..config.global_clusters).map(|i| km.centers[i % k].clone()).collect());
        }
        _ => {}
    }
    if config.variant == Variant::Mwms || config.variant == Variant::Mwmc {
        let ctx = if config.variant == Variant::Mwmc { dataset.contexts() } else { None };
        state.assignments = super::objective::assign_groups(
            &state.locals,
            &state.globals,
            ctx,
            state.context_centroids.as_deref(),
            config.order(),
            config.mode,
        )?;
    }
    Ok(state)
}

struct Fitter<'a> {
    config: &'a FitConfig,
    runtime: &'a Runtime,
    eval: Evaluator,
    empirical: Vec<DiscreteMeasure>,
    scales: Vec<f64>,
    contexts: Option<&'a [Vec<f64>]>,
}

fn run(
    dataset: &GroupedDataset,
    config: &FitConfig,
    runtime: &Runtime,
    mut state: MultilevelState,
    fresh: bool,
    observer: &mut dyn FnMut(&IterationEvent),
) -> Result<MultilevelState> {
    let contexts = if config.variant == Variant::Mwmc {
        if state.context_centroids.is_none() {
            return Err(Error::InvalidParameter("context variant needs context centroids".into()));
        }
        Some(dataset.contexts().ok_or(Error::MissingContexts)?)
    } else {
        None
    };
    let fitter = Fitter {
        config,
        runtime,
        eval: Evaluator::from_config(config),
        empirical: dataset.empirical_measures(),
        scales: local_scales(dataset, config.local_scale),
        contexts,
    };
    let mut terms = Terms::compute(&fitter.eval, &fitter.empirical, &state, contexts, runtime)?;
    state.lambda = match config.lambda {
        Lambda::Value(v) => v,
        Lambda::Auto if !fresh => state.lambda,
        Lambda::Auto => lambda_heuristic(terms.local_sum(&fitter.scales), terms.global_sum(), dataset.len())?,
    };
    let mut value = terms.total(&fitter.scales, state.lambda);
    if fresh {
        state.objective_trace = vec![value];
    }
    state.converged = false;
    state.warnings.retain(|w| !w.starts_with("not converged"));

    for iteration in 1..=config.max_iter {
        let start = Instant::now();
        if config.variant == Variant::Mwms {
            fitter.shared_atom_step(&mut state, &mut terms)?;
            fitter.shared_weight_step(&mut state, &mut terms)?;
        } else {
            fitter.local_step(&mut state, &mut terms)?;
        }
        fitter.global_step(&mut state, &mut terms)?;
        let next = terms.total(&fitter.scales, state.lambda);
        if !next.is_finite() {
            return Err(Error::BarycenterDiverged);
        }
        state.objective_trace.push(next);
        observer(&IterationEvent {
            iteration,
            objective: next,
            elapsed: start.elapsed(),
        });
        let change = (value - next).abs();
        value = next;
        if change <= config.tol * value.abs().max(f64::MIN_POSITIVE) {
            state.converged = true;
            break;
        }
    }
    state.assignments = (0..state.locals.len()).map(|j| argmin(&terms.cross[j])).collect();
    if !state.converged {
        state.warnings.push(format!("not converged after {} iterations", config.max_iter));
        log::warn!("{} fit stopped at the iteration cap ({})", config.variant, config.max_iter);
    }
    Ok(state)
}

impl Fitter<'_> {
    fn global_weight(&self, state: &MultilevelState) -> f64 {
        state.lambda / state.locals.len() as f64
    }

    fn context(&self, j: usize) -> Option<&[f64]> {
        self.contexts.map(|c| c[j].as_slice())
    }

    /// Block value of group `j` with local term `local` and cross row `row`.
    fn block(&self, state: &MultilevelState, j: usize, local: f64, row: &[f64]) -> f64 {
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        self.scales[j] * local + self.global_weight(state) * best
    }

    /// Mixing weights of the two-input local barycenter.
    fn local_problem(&self, state: &MultilevelState, j: usize, cluster: usize, budget: usize) -> Result<BarycenterProblem> {
        let w = self.global_weight(state);
        let h = &state.globals[cluster];
        let (inputs, mix) = if w > 0.0 {
            let s = self.scales[j];
            (vec![self.empirical[j].clone(), h.clone()], vec![s / (s + w), w / (s + w)])
        } else {
            (vec![self.empirical[j].clone()], vec![1.0])
        };
        BarycenterProblem::new(inputs, mix, budget, self.config.mode, self.config.order())
    }

    /// Moves every `G_j` toward the barycenter of its data and its global
    /// measure; a candidate replaces `G_j` only if its block value drops.
    fn local_step(&self, state: &mut MultilevelState, terms: &mut Terms) -> Result<()> {
        let snapshot: &MultilevelState = state;
        let candidates = self.runtime.par_range(snapshot.locals.len(), |j| {
            let problem = self.local_problem(snapshot, j, argmin(&terms.cross[j]), self.config.local_atoms)?;
            let res = free_support_barycenter(&problem, &snapshot.locals[j], &self.config.inner)?;
            let cand = res.measure.pruned(0.0);
            let local = self.eval.value(&self.empirical[j], &cand)?;
            let row = cross_row(&self.eval, &cand, &snapshot.globals, self.context(j), snapshot.context_centroids.as_deref())?;
            let old = self.block(snapshot, j, terms.local[j], &terms.cross[j]);
            let new = self.block(snapshot, j, local, &row);
            Ok((new < old).then_some((cand, local, row)))
        })?;
        for (j, c) in candidates.into_iter().enumerate() {
            if let Some((g, local, row)) = c {
                state.locals[j] = g;
                terms.local[j] = local;
                terms.cross[j] = row;
            }
        }
        Ok(())
    }

    /// Recomputes every global measure as the barycenter of its cluster and
    /// reseeds empty clusters with the worst-served local measure. Candidates
    /// are accepted in index order when the global term drops.
    fn global_step(&self, state: &mut MultilevelState, terms: &mut Terms) -> Result<()> {
        let m = state.locals.len();
        let clusters = state.globals.len();
        let labels: Vec<usize> = (0..m).map(|j| argmin(&terms.cross[j])).collect();
        let mut members = vec![Vec::new(); clusters];
        for (j, &i) in labels.iter().enumerate() {
            members[i].push(j);
        }
        let snapshot: &MultilevelState = state;
        let candidates = self.runtime.par_range(clusters, |i| {
            let cell = &members[i];
            if cell.is_empty() {
                return Ok(None);
            }
            let inputs: Vec<DiscreteMeasure> = cell.iter().map(|&l| snapshot.locals[l].pruned(0.0)).collect();
            let sizes: Vec<usize> = inputs.iter().map(|g| g.support_size()).collect();
            let budget = support_bound(&sizes).min(self.config.support_cap).max(1);
            let init = truncate_heaviest(&snapshot.globals[i], budget);
            let mix = vec![1.0 / cell.len() as f64; cell.len()];
            let problem = BarycenterProblem::new(inputs, mix, budget, self.config.mode, self.config.order())?;
            let res = free_support_barycenter(&problem, &init, &self.config.inner)?;
            let theta = self.contexts.map(|c| mean_of(cell.iter().map(|&l| c[l].as_slice())));
            Ok(Some((res.measure.pruned(0.0), theta)))
        })?;
        let mut candidates = candidates;
        let mut worst: Option<usize> = None;
        for (i, c) in candidates.iter_mut().enumerate() {
            if c.is_some() {
                continue;
            }
            // Reseed from the group farthest from its own global measure,
            // skipping groups already used for an earlier reseed.
            let mut best: Option<(usize, f64)> = None;
            for j in 0..m {
                if Some(j) == worst {
                    continue;
                }
                let d = terms.best(j);
                if best.is_none_or(|(_, b)| d > b) {
                    best = Some((j, d));
                }
            }
            if let Some((j, _)) = best {
                worst = Some(j);
                let h = truncate_heaviest(&state.locals[j].pruned(0.0), self.config.support_cap);
                *c = Some((h, self.context(j).map(|v| v.to_vec())));
                log::debug!("reseeding empty global cluster {i} from group {j}");
            }
        }

        let pending: Vec<usize> = (0..clusters).filter(|&i| candidates[i].is_some()).collect();
        let pairs: Vec<(usize, usize)> = pending.iter().flat_map(|&i| (0..m).map(move |j| (i, j))).collect();
        let values = self.runtime.par_map(&pairs, |_, &(i, j)| {
            let (h, theta) = candidates[i].as_ref().expect("pending candidate");
            let d = self.eval.value(&state.locals[j], h)?;
            Ok(match (self.context(j), theta) {
                (Some(phi), Some(t)) => d + sq_dist(phi, t),
                _ => d,
            })
        })?;

        for (n, &i) in pending.iter().enumerate() {
            let column = &values[n * m..(n + 1) * m];
            let current = terms.global_sum();
            let proposed: f64 = (0..m)
                .map(|j| {
                    let others = terms.cross[j]
                        .iter()
                        .enumerate()
                        .filter(|(u, _)| *u != i)
                        .map(|(_, v)| *v)
                        .fold(f64::INFINITY, f64::min);
                    others.min(column[j])
                })
                .sum();
            if proposed < current {
                let (h, theta) = candidates[i].take().expect("pending candidate");
                state.globals[i] = h;
                if let (Some(centroids), Some(t)) = (state.context_centroids.as_mut(), theta) {
                    centroids[i] = t;
                }
                for j in 0..m {
                    terms.cross[j][i] = column[j];
                }
            }
        }
        Ok(())
    }

    /// Moves the shared atoms to the minimizer of the objective with all
    /// couplings held fixed, halving the step until the objective drops.
    fn shared_atom_step(&self, state: &mut MultilevelState, terms: &mut Terms) -> Result<()> {
        let support = state.shared_atoms.clone().expect("sharing variant keeps shared atoms");
        let k = support.len();
        let d = support[0].len();
        let w = self.global_weight(state);
        let snapshot: &MultilevelState = state;
        let plans = self.runtime.par_map(&snapshot.locals, |j, g| {
            let h = &snapshot.globals[argmin(&terms.cross[j])];
            Ok((self.eval.plan(&self.empirical[j], g)?, self.eval.plan(g, h)?, argmin(&terms.cross[j])))
        })?;
        let mut num = vec![vec![0.0; d]; k];
        let mut den = vec![0.0; k];
        for (j, (t, u, i)) in plans.iter().enumerate() {
            let p = &self.empirical[j];
            for (v, x) in p.atoms().iter().enumerate() {
                for a in 0..k {
                    let mass = self.scales[j] * t.get(v, a);
                    if mass > 0.0 {
                        den[a] += mass;
                        for (n, xc) in num[a].iter_mut().zip(x) {
                            *n += mass * xc;
                        }
                    }
                }
            }
            if w > 0.0 {
                for a in 0..k {
                    for (h_idx, h) in state.globals[*i].atoms().iter().enumerate() {
                        let mass = w * u.get(a, h_idx);
                        if mass > 0.0 {
                            den[a] += mass;
                            for (n, hc) in num[a].iter_mut().zip(h) {
                                *n += mass * hc;
                            }
                        }
                    }
                }
            }
        }
        let target: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                if den[a] > WEIGHT_FLOOR {
                    num[a].iter().map(|n| n / den[a]).collect()
                } else {
                    support[a].clone()
                }
            })
            .collect();

        let current = terms.total(&self.scales, state.lambda);
        let mut theta = 1.0;
        for _ in 0..=self.config.inner.max_halvings {
            let moved: Vec<Vec<f64>> = support
                .iter()
                .zip(&target)
                .map(|(s, t)| s.iter().zip(t).map(|(a, b)| a + theta * (b - a)).collect())
                .collect();
            let mut trial = state.clone();
            for g in trial.locals.iter_mut() {
                *g = DiscreteMeasure::new(moved.clone(), g.weights().to_vec())?;
            }
            trial.shared_atoms = Some(moved);
            let trial_terms = Terms::compute(&self.eval, &self.empirical, &trial, self.contexts, self.runtime)?;
            if trial_terms.total(&self.scales, state.lambda) < current {
                *state = trial;
                *terms = trial_terms;
                return Ok(());
            }
            theta *= 0.5;
        }
        Ok(())
    }

    /// Re-weights every `G_j` on the shared atoms; block acceptance as in
    /// the local step.
    fn shared_weight_step(&self, state: &mut MultilevelState, terms: &mut Terms) -> Result<()> {
        let support = state.shared_atoms.clone().expect("sharing variant keeps shared atoms");
        let snapshot: &MultilevelState = state;
        let candidates = self.runtime.par_range(snapshot.locals.len(), |j| {
            let problem = self.local_problem(snapshot, j, argmin(&terms.cross[j]), support.len())?;
            let res = fixed_support_barycenter(&problem, &support, Some(snapshot.locals[j].weights()), &self.config.inner)?;
            let cand = DiscreteMeasure::new(support.clone(), res.weights)?;
            let local = self.eval.value(&self.empirical[j], &cand)?;
            let row = cross_row(&self.eval, &cand, &snapshot.globals, self.context(j), None)?;
            let old = self.block(snapshot, j, terms.local[j], &terms.cross[j]);
            let new = self.block(snapshot, j, local, &row);
            Ok((new < old).then_some((cand, local, row)))
        })?;
        for (j, c) in candidates.into_iter().enumerate() {
            if let Some((g, local, row)) = c {
                state.locals[j] = g;
                terms.local[j] = local;
                terms.cross[j] = row;
            }
        }
        Ok(())
    }
}

fn mean_of<'a>(vs: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0.0;
    for v in vs {
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        n += 1.0;
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
