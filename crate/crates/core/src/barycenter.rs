//! Wasserstein barycenters of discrete measures.
//!
//! Weights on a fixed support are found by accelerated dual averaging over
//! the simplex, using the transport potentials as subgradients. Free-support
//! solvers alternate that weight step with an atom step: a weighted mean of
//! coupled input atoms for order 2, a weighted geometric median for order 1.
//! Every accepted step is checked against the objective
//! `Σ_j ω_j · value(T_j)`, so the outer trace never increases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{distinct_count, kmeans_pp_init_weighted, nearest};
use crate::lp::solve_equality_lp;
use crate::measure::{cost_matrix, sq_dist, DiscreteMeasure, Order};
use crate::median::{geometric_median_trace, MedianProblem};
use crate::transport::{plan_value, solve_plan, OtMode, SinkhornParams, TransportPlan};

/// Atoms lighter than this are treated as massless in the atom update.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Theorem-style support bound `Σ s_i − N + 1` for a barycenter of `N`
/// measures with `s_i` atoms each.
pub fn support_bound(sizes: &[usize]) -> usize {
    (sizes.iter().sum::<usize>() + 1).saturating_sub(sizes.len())
}

/// Inputs, mixing weights and budget of one barycenter problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterProblem {
    pub inputs: Vec<DiscreteMeasure>,
    pub mix_weights: Vec<f64>,
    pub support_budget: usize,
    pub mode: OtMode,
    pub order: Order,
}

impl BarycenterProblem {
    pub fn new(inputs: Vec<DiscreteMeasure>, mix_weights: Vec<f64>, support_budget: usize, mode: OtMode, order: Order) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidParameter("barycenter needs at least one input".into()));
        }
        if support_budget == 0 {
            return Err(Error::InvalidParameter("support budget must be at least 1".into()));
        }
        if mix_weights.len() != inputs.len() {
            return Err(Error::LengthMismatch {
                left: mix_weights.len(),
                right: inputs.len(),
            });
        }
        if mix_weights.iter().any(|w| !(*w >= 0.0)) || (mix_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights("mixing weights must lie on the simplex".into()));
        }
        for p in &inputs[1..] {
            inputs[0].check_dim(p)?;
        }
        if let OtMode::Entropic { tau, .. } = mode {
            if !(tau > 0.0) {
                return Err(Error::InvalidParameter(format!("regularization must be positive, got {tau}")));
            }
        }
        Ok(Self {
            inputs,
            mix_weights,
            support_budget,
            mode,
            order,
        })
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].dim()
    }

    /// `min(k, Σ s_i − N + 1)`.
    pub fn effective_budget(&self) -> usize {
        let sizes: Vec<usize> = self.inputs.iter().map(|p| p.support_size()).collect();
        self.support_budget.min(support_bound(&sizes)).max(1)
    }

    /// Distinct input atoms with their mixture mass `Σ_j ω_j a_j`.
    pub fn pooled_atoms(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut atoms: Vec<Vec<f64>> = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (p, w) in self.inputs.iter().zip(&self.mix_weights) {
            for (x, a) in p.atoms().iter().zip(p.weights()) {
                let key: Vec<u64> = x.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect();
                let slot = *index.entry(key).or_insert_with(|| {
                    atoms.push(x.clone());
                    mass.push(0.0);
                    atoms.len() - 1
                });
                mass[slot] += w * a;
            }
        }
        (atoms, mass)
    }
}

/// Tuning knobs shared by the barycenter solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarycenterParams {
    pub sinkhorn: SinkhornParams,
    /// Dual-averaging step `t₀`; `None` uses `0.5 / max_j mean(M_j)`.
    pub step: Option<f64>,
    /// Sup-norm threshold on the averaged weights.
    pub weight_tol: f64,
    pub weight_max_iter: usize,
    /// Atom blending factor `θ ∈ (0, 1]`.
    pub theta: f64,
    /// Halve `θ` while the objective would increase.
    pub backtracking: bool,
    pub max_halvings: usize,
    /// Relative objective change that ends the outer loop.
    pub tol: f64,
    pub max_iter: usize,
    /// Return the last iterate instead of an error when `max_iter` is hit.
    pub allow_unconverged: bool,
    pub median_tol: f64,
    pub median_max_iter: usize,
}

impl Default for BarycenterParams {
    fn default() -> Self {
        Self {
            sinkhorn: SinkhornParams::default(),
            step: None,
            weight_tol: 1e-7,
            weight_max_iter: 100,
            theta: 1.0,
            backtracking: true,
            max_halvings: 8,
            tol: 1e-7,
            max_iter: 200,
            allow_unconverged: false,
            median_tol: 1e-9,
            median_max_iter: 1000,
        }
    }
}

/// Weights found on a fixed support, with the plans that realize them.
#[derive(Debug, Clone)]
pub struct FixedSupportResult {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub plans: Vec<TransportPlan>,
    pub iterations: usize,
    pub converged: bool,
}

/// Outcome of a free-support solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterResult {
    pub measure: DiscreteMeasure,
    /// `Σ_j ω_j value(T_j)` at the returned measure.
    pub objective: f64,
    /// Objective at the start and after every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Atoms that ran out of mass at some point (indices into the initial support).
    pub flagged_atoms: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

/// Objective and plans of `(support, weights)` against every input.
pub(crate) fn evaluate(
    problem: &BarycenterProblem,
    support: &[Vec<f64>],
    weights: &[f64],
    sinkhorn: &SinkhornParams,
) -> Result<(f64, Vec<TransportPlan>)> {
    let mut total = 0.0;
    let mut plans = Vec::with_capacity(problem.inputs.len());
    for (p, w) in problem.inputs.iter().zip(&problem.mix_weights) {
        let m = cost_matrix(p.atoms(), support, problem.order)?;
        let plan = solve_plan(p.weights(), weights, &m, problem.mode, sinkhorn)?;
        total += w * plan_value(&plan, p.weights(), weights, problem.mode);
        plans.push(plan);
    }
    Ok((total, plans))
}

/// Mass each support atom receives when every input atom moves to the
/// support independently: a soft-min split in entropic mode, the nearest
/// atom (lowest index on ties) in exact mode. For one input this is the
/// optimal weight vector.
fn relaxed_weights(problem: &BarycenterProblem, support: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = support.len();
    let mut b = vec![0.0; k];
    for (p, w) in problem.inputs.iter().zip(&problem.mix_weights) {
        let m = cost_matrix(p.atoms(), support, problem.order)?;
        for (i, a) in p.weights().iter().enumerate() {
            let row = m.row(i);
            match problem.mode {
                OtMode::Exact => {
                    let mut best = 0;
                    for u in 1..k {
                        if row[u] < row[best] {
                            best = u;
                        }
                    }
                    b[best] += w * a;
                }
                OtMode::Entropic { tau, .. } => {
                    let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                    let e: Vec<f64> = row.iter().map(|c| (-(c - lo) / tau).exp()).collect();
                    let s: f64 = e.iter().sum();
                    for u in 0..k {
                        b[u] += w * a * e[u] / s;
                    }
                }
            }
        }
    }
    let s: f64 = b.iter().sum();
    Ok(b.into_iter().map(|x| x / s).collect())
}

/// Barycenter weights on a fixed support by accelerated dual averaging.
///
/// The query point of every iteration is evaluated; the best one seen is
/// returned, so the result never scores worse than the starting weights.
pub fn fixed_support_barycenter(
    problem: &BarycenterProblem,
    support: &[Vec<f64>],
    init: Option<&[f64]>,
    params: &BarycenterParams,
) -> Result<FixedSupportResult> {
    let k = support.len();
    if k == 0 {
        return Err(Error::EmptyPointSet);
    }
    if let Some(x) = support.iter().find(|x| x.len() != problem.dim()) {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x.len(),
        });
    }
    let costs: Vec<_> = problem
        .inputs
        .iter()
        .map(|p| cost_matrix(p.atoms(), support, problem.order))
        .collect::<Result<_>>()?;
    let step = params.step.unwrap_or_else(|| {
        let mx = costs.iter().map(|m| m.mean()).fold(0.0, f64::max);
        if mx > 0.0 {
            0.5 / mx
        } else {
            1.0
        }
    });

    if let Some(w) = init {
        if w.len() != k {
            return Err(Error::LengthMismatch { left: w.len(), right: k });
        }
    }
    let relaxed = relaxed_weights(problem, support)?;
    let start = init.map_or_else(|| relaxed.clone(), <[f64]>::to_vec);
    // Multiplicative updates cannot revive an exact zero, so start inside
    // the simplex.
    let floor = 1e-8;
    let mut log_tilde: Vec<f64> = start.iter().map(|x| (x + floor).ln()).collect();
    let mut tilde = softmax(&log_tilde);
    let mut hat = tilde.clone();

    let mut best: Option<(f64, Vec<f64>, Vec<TransportPlan>)> = None;
    let eval_at = |b: &[f64]| -> Result<(f64, Vec<TransportPlan>, Vec<f64>)> {
        let mut total = 0.0;
        let mut plans = Vec::with_capacity(costs.len());
        let mut alpha = vec![0.0; k];
        for ((p, w), m) in problem.inputs.iter().zip(&problem.mix_weights).zip(&costs) {
            let plan = solve_plan(p.weights(), b, m, problem.mode, &params.sinkhorn)?;
            total += w * plan_value(&plan, p.weights(), b, problem.mode);
            let g = plan.dual_b.as_ref().expect("solvers return column potentials");
            for (al, gi) in alpha.iter_mut().zip(g) {
                *al += w * gi;
            }
            plans.push(plan);
        }
        Ok((total, plans, alpha))
    };
    // Score the starting weights exactly as given, so a warm start is never
    // replaced by something worse.
    if let Some(w) = init {
        let (obj, plans, _) = eval_at(w)?;
        best = Some((obj, w.to_vec(), plans));
    }
    // The relaxed split is optimal for a single input and a cheap candidate
    // otherwise.
    let (obj, plans, _) = eval_at(&relaxed)?;
    if best.as_ref().is_none_or(|(o, _, _)| obj < *o) {
        best = Some((obj, relaxed, plans));
    }

    let mut converged = false;
    let mut iterations = 0;
    let mut t = 1.0;
    while iterations < params.weight_max_iter {
        iterations += 1;
        let beta = (t + 1.0) / 2.0;
        let b: Vec<f64> = hat.iter().zip(&tilde).map(|(h, x)| (1.0 - 1.0 / beta) * h + x / beta).collect();
        let (obj, plans, alpha) = eval_at(&b)?;
        if best.as_ref().is_none_or(|(o, _, _)| obj < *o) {
            best = Some((obj, b, plans));
        }
        for (lt, a) in log_tilde.iter_mut().zip(&alpha) {
            *lt -= step * beta * a;
        }
        if log_tilde.iter().any(|v| !v.is_finite()) {
            return Err(Error::BarycenterDiverged);
        }
        tilde = softmax(&log_tilde);
        let mut change: f64 = 0.0;
        for (h, x) in hat.iter_mut().zip(&tilde) {
            let nh = (1.0 - 1.0 / beta) * *h + x / beta;
            change = change.max((nh - *h).abs());
            *h = nh;
        }
        t += 1.0;
        if change < params.weight_tol {
            converged = true;
            break;
        }
    }
    // The final averaged point is also a candidate.
    let (obj, plans, _) = eval_at(&hat)?;
    if best.as_ref().is_none_or(|(o, _, _)| obj < *o) {
        best = Some((obj, hat, plans));
    }
    let (objective, weights, plans) = best.expect("at least one iterate was evaluated");
    Ok(FixedSupportResult {
        weights,
        objective,
        plans,
        iterations,
        converged,
    })
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// K-means++ seeding over the pooled input atoms, weighted by mixture mass,
/// with the budget capped by the support bound and the distinct atom count.
pub fn kmeanspp_initial_support(problem: &BarycenterProblem, seed: u64) -> Result<Vec<Vec<f64>>> {
    let (atoms, mass) = problem.pooled_atoms();
    let positive: Vec<usize> = (0..atoms.len()).filter(|&i| mass[i] > 0.0).collect();
    let atoms: Vec<Vec<f64>> = positive.iter().map(|&i| atoms[i].clone()).collect();
    let mass: Vec<f64> = positive.iter().map(|&i| mass[i]).collect();
    let k = problem.effective_budget().min(distinct_count(&atoms));
    kmeans_pp_init_weighted(&atoms, &mass, k, seed)
}

enum AtomRule {
    Mean,
    Median,
}

/// Free-support barycenter under squared Euclidean cost.
pub fn free_support_barycenter_w2(problem: &BarycenterProblem, init: &DiscreteMeasure, params: &BarycenterParams) -> Result<BarycenterResult> {
    if problem.order != Order::Two {
        return Err(Error::InvalidParameter("the order-2 solver needs order 2".into()));
    }
    free_support(problem, init, params, AtomRule::Mean)
}

/// Free-support barycenter under Euclidean (order 1) cost with geometric
/// median atom updates.
pub fn free_support_barycenter_w1(problem: &BarycenterProblem, init: &DiscreteMeasure, params: &BarycenterParams) -> Result<BarycenterResult> {
    if problem.order != Order::One {
        return Err(Error::InvalidParameter("the order-1 solver needs order 1".into()));
    }
    free_support(problem, init, params, AtomRule::Median)
}

/// Dispatches on the problem order.
pub fn free_support_barycenter(problem: &BarycenterProblem, init: &DiscreteMeasure, params: &BarycenterParams) -> Result<BarycenterResult> {
    match problem.order {
        Order::Two => free_support(problem, init, params, AtomRule::Mean),
        Order::One => free_support(problem, init, params, AtomRule::Median),
    }
}

fn free_support(problem: &BarycenterProblem, init: &DiscreteMeasure, params: &BarycenterParams, rule: AtomRule) -> Result<BarycenterResult> {
    problem.inputs[0].check_dim(init)?;
    if !(params.theta > 0.0 && params.theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1], got {}", params.theta)));
    }
    // Respect the budget: keep the heaviest atoms of the initial measure.
    let budget = problem.effective_budget();
    let init = truncate_heaviest(init, budget);
    let mut support: Vec<Vec<f64>> = init.atoms().to_vec();
    let mut weights: Vec<f64> = init.weights().to_vec();
    let k = support.len();

    let (mut objective, mut plans) = evaluate(problem, &support, &weights, &params.sinkhorn)?;
    let mut trace = vec![objective];
    let mut flagged: Vec<usize> = Vec::new();
    let mut resampled = vec![false; k];
    let mut frozen = vec![false; k];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        let before = objective;

        // Weight step.
        let ws = fixed_support_barycenter(problem, &support, Some(&weights), params)?;
        if ws.objective <= objective {
            weights = ws.weights;
            objective = ws.objective;
            plans = ws.plans;
        }

        // Atoms without mass get one deterministic relocation, then freeze.
        for u in 0..k {
            if weights[u] <= WEIGHT_FLOOR && !frozen[u] {
                if !flagged.contains(&u) {
                    flagged.push(u);
                }
                if resampled[u] {
                    frozen[u] = true;
                } else {
                    resampled[u] = true;
                    let (pool, _) = problem.pooled_atoms();
                    let far = farthest_from(&pool, &support);
                    let mut cand = support.clone();
                    cand[u] = pool[far].clone();
                    let (obj, p) = evaluate(problem, &cand, &weights, &params.sinkhorn)?;
                    if obj <= objective {
                        support = cand;
                        objective = obj;
                        plans = p;
                    } else {
                        frozen[u] = true;
                    }
                }
            }
        }

        // Atom step toward the coupled target, with backtracking on θ.
        let target = match rule {
            AtomRule::Mean => mean_targets(problem, &plans, &support, &weights, &frozen),
            AtomRule::Median => median_targets(problem, &plans, &support, &frozen, params)?,
        };
        let mut theta = params.theta;
        for _ in 0..=params.max_halvings {
            let cand: Vec<Vec<f64>> = support
                .iter()
                .zip(&target)
                .map(|(x, y)| x.iter().zip(y).map(|(a, b)| (1.0 - theta) * a + theta * b).collect())
                .collect();
            let (obj, p) = evaluate(problem, &cand, &weights, &params.sinkhorn)?;
            if obj <= objective {
                support = cand;
                objective = obj;
                plans = p;
                break;
            }
            if !params.backtracking {
                break;
            }
            theta *= 0.5;
        }

        trace.push(objective);
        let rel = (before - objective) / before.abs().max(f64::MIN_POSITIVE);
        if rel < params.tol {
            converged = true;
            break;
        }
    }
    if !converged && !params.allow_unconverged {
        return Err(Error::BarycenterNotConverged { trace });
    }
    let keep: Vec<usize> = (0..k).filter(|&u| weights[u] > 0.0).collect();
    let measure = DiscreteMeasure::from_masses(
        keep.iter().map(|&u| support[u].clone()).collect(),
        keep.iter().map(|&u| weights[u]).collect(),
    )?;
    Ok(BarycenterResult {
        measure,
        objective,
        objective_trace: trace,
        flagged_atoms: flagged,
        converged,
        iterations,
    })
}

/// Keeps the `budget` heaviest atoms (ties by index) and renormalizes.
pub(crate) fn truncate_heaviest(m: &DiscreteMeasure, budget: usize) -> DiscreteMeasure {
    if m.support_size() <= budget {
        return m.clone();
    }
    let mut idx: Vec<usize> = (0..m.support_size()).collect();
    idx.sort_by(|&a, &b| m.weights()[b].total_cmp(&m.weights()[a]).then(a.cmp(&b)));
    idx.truncate(budget);
    idx.sort_unstable();
    DiscreteMeasure::from_masses(
        idx.iter().map(|&i| m.atoms()[i].clone()).collect(),
        idx.iter().map(|&i| m.weights()[i].max(f64::MIN_POSITIVE)).collect(),
    )
    .expect("truncation keeps positive mass")
}

fn farthest_from(pool: &[Vec<f64>], support: &[Vec<f64>]) -> usize {
    let mut best = (0, -1.0);
    for (i, p) in pool.iter().enumerate() {
        let d = nearest(p, support).1;
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// `(Σ_j ω_j X_j T_j) diag(b⁻¹)`, column by column.
fn mean_targets(problem: &BarycenterProblem, plans: &[TransportPlan], support: &[Vec<f64>], weights: &[f64], frozen: &[bool]) -> Vec<Vec<f64>> {
    let d = problem.dim();
    let k = support.len();
    let mut acc = vec![vec![0.0; d]; k];
    for ((p, w), plan) in problem.inputs.iter().zip(&problem.mix_weights).zip(plans) {
        for (i, x) in p.atoms().iter().enumerate() {
            for u in 0..k {
                let t = w * plan.get(i, u);
                if t != 0.0 {
                    for (a, xi) in acc[u].iter_mut().zip(x) {
                        *a += t * xi;
                    }
                }
            }
        }
    }
    (0..k)
        .map(|u| {
            if frozen[u] || weights[u] <= WEIGHT_FLOOR {
                support[u].clone()
            } else {
                acc[u].iter().map(|a| a / weights[u]).collect()
            }
        })
        .collect()
}

/// Per-atom weighted geometric median of the coupled input atoms.
fn median_targets(
    problem: &BarycenterProblem,
    plans: &[TransportPlan],
    support: &[Vec<f64>],
    frozen: &[bool],
    params: &BarycenterParams,
) -> Result<Vec<Vec<f64>>> {
    let k = support.len();
    let mut out = Vec::with_capacity(k);
    for u in 0..k {
        let mut pts = Vec::new();
        let mut eta = Vec::new();
        for ((p, w), plan) in problem.inputs.iter().zip(&problem.mix_weights).zip(plans) {
            for (i, x) in p.atoms().iter().enumerate() {
                let t = w * plan.get(i, u);
                if t > 0.0 {
                    pts.push(x.clone());
                    eta.push(t);
                }
            }
        }
        if frozen[u] || eta.iter().sum::<f64>() <= WEIGHT_FLOOR {
            out.push(support[u].clone());
            continue;
        }
        let mp = MedianProblem::new(pts, eta)?.with_tolerance(params.median_tol, params.median_max_iter);
        out.push(geometric_median_trace(&mp, Some(&support[u]))?.point);
    }
    Ok(out)
}

/// Largest number of joint atom tuples the exact solver accepts.
pub const EXACT_TUPLE_LIMIT: usize = 4096;

/// Exact order-2 barycenter of a few tiny measures via the multi-marginal
/// linear program over atom tuples. Returns the barycenter and
/// `min Σ_j ω_j W₂²(P_j, ·)`.
pub fn exact_w2_barycenter(inputs: &[DiscreteMeasure], mix_weights: &[f64]) -> Result<(DiscreteMeasure, f64)> {
    if inputs.is_empty() {
        return Err(Error::InvalidParameter("barycenter needs at least one input".into()));
    }
    if mix_weights.len() != inputs.len() {
        return Err(Error::LengthMismatch {
            left: mix_weights.len(),
            right: inputs.len(),
        });
    }
    let sizes: Vec<usize> = inputs.iter().map(|p| p.support_size()).collect();
    let tuples = sizes.iter().try_fold(1usize, |acc, s| acc.checked_mul(*s)).unwrap_or(usize::MAX);
    if tuples > EXACT_TUPLE_LIMIT {
        return Err(Error::InstanceTooLarge(format!("{tuples} atom tuples exceed {EXACT_TUPLE_LIMIT}")));
    }
    let d = inputs[0].dim();
    let total_w: f64 = mix_weights.iter().sum();
    let omega: Vec<f64> = mix_weights.iter().map(|w| w / total_w).collect();

    let decode = |mut t: usize| -> Vec<usize> {
        let mut idx = vec![0; sizes.len()];
        for (j, s) in sizes.iter().enumerate().rev() {
            idx[j] = t % s;
            t /= s;
        }
        idx
    };
    let mut centers = Vec::with_capacity(tuples);
    let mut cost = Vec::with_capacity(tuples);
    for t in 0..tuples {
        let idx = decode(t);
        let mut c = vec![0.0; d];
        for (j, &i) in idx.iter().enumerate() {
            for (cc, x) in c.iter_mut().zip(&inputs[j].atoms()[i]) {
                *cc += omega[j] * x;
            }
        }
        let v: f64 = idx.iter().enumerate().map(|(j, &i)| omega[j] * sq_dist(&inputs[j].atoms()[i], &c)).sum();
        centers.push(c);
        cost.push(v);
    }
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (j, p) in inputs.iter().enumerate() {
        for (i, a) in p.weights().iter().enumerate() {
            rows.push((0..tuples).map(|t| if decode(t)[j] == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>());
            rhs.push(*a);
        }
    }
    let sol = solve_equality_lp(&rows, &rhs, &cost)?;
    let keep: Vec<usize> = (0..tuples).filter(|&t| sol.x[t] > 1e-14).collect();
    let bary = DiscreteMeasure::from_masses(keep.iter().map(|&t| centers[t].clone()).collect(), keep.iter().map(|&t| sol.x[t]).collect())?;
    Ok((bary.aggregated(), sol.objective))
}
