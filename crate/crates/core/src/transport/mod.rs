//! Optimal transport between discrete measures.
//!
//! Two solvers share one plan type: entropic Sinkhorn scaling (kernel form
//! with a log-domain fallback) and an exact transportation-simplex solver.
//! Both return dual potentials; the column potential is what the barycenter
//! weight solver consumes as a subgradient.

mod exact;

pub use exact::{exact_ot, exact_ot_small, ENUMERATION_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{cost_matrix, CostMatrix, DiscreteMeasure, Order};

/// Entries below this are treated as zero mass and pruned before scaling.
const ZERO_MASS: f64 = 0.0;

/// Above this spread of `(M - rowmin)/τ` the iteration switches to annealed
/// log-space scaling: the kernel form converges slowly there and eventually
/// underflows.
const KERNEL_EXPONENT_LIMIT: f64 = 30.0;

/// `exp(-x)` underflows to zero beyond this.
const KERNEL_UNDERFLOW: f64 = 700.0;

/// A coupling between two marginals together with its cost and potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` coupling.
    pub coupling: Vec<f64>,
    /// `⟨T, M⟩`.
    pub cost: f64,
    /// Potential over the first marginal, centered to zero mean.
    pub dual_a: Option<Vec<f64>>,
    /// Potential over the second marginal, centered to zero mean.
    pub dual_b: Option<Vec<f64>>,
    /// `τ`; zero for exact plans.
    pub regularization: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm violation of the marginal constraints.
    pub marginal_residual: f64,
}

impl TransportPlan {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.coupling.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for r in self.coupling.chunks(self.cols) {
            for (sj, t) in s.iter_mut().zip(r) {
                *sj += t;
            }
        }
        s
    }

    /// `KL(T | a ⊗ b)`, with `0 log 0 = 0`.
    pub fn relative_entropy(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut h = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let t = self.get(i, j);
                if t > 0.0 {
                    h += t * (t / (a[i] * b[j])).ln();
                }
            }
        }
        h.max(0.0)
    }

    /// `Σ T log T`, the negative entropy used by the smoothed dual.
    pub fn neg_entropy(&self) -> f64 {
        self.coupling
            .iter()
            .filter(|t| **t > 0.0)
            .map(|t| t * t.ln())
            .sum()
    }
}

/// Stopping rule and stabilization switch for Sinkhorn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    /// Sup-norm threshold on the change of `log u` between sweeps.
    pub tol: f64,
    pub max_iter: usize,
    /// Permit the log-space iteration when the kernel would underflow.
    pub log_domain: bool,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
            log_domain: true,
        }
    }
}

fn check_simplex(w: &[f64], name: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidWeights(format!("{name} has negative or non-finite entries")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidWeights(format!("{name} sums to {s}, expected 1")));
    }
    Ok(())
}

pub(crate) fn check_problem(a: &[f64], b: &[f64], m: &CostMatrix) -> Result<()> {
    check_simplex(a, "a")?;
    check_simplex(b, "b")?;
    if m.rows() != a.len() || m.cols() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len() * b.len(),
            got: m.rows() * m.cols(),
        });
    }
    Ok(())
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

fn center(mut v: Vec<f64>) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v
}

struct Scaled {
    /// Potentials `f`, `g` with `T_ij = exp((f_i + g_j − M_ij)/τ)`.
    f: Vec<f64>,
    g: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn kernel_sinkhorn(a: &[f64], b: &[f64], m: &CostMatrix, tau: f64, p: &SinkhornParams) -> Option<Scaled> {
    let (k, l) = (m.rows(), m.cols());
    let shift: Vec<f64> = (0..k).map(|i| m.row(i).iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let kern: Vec<f64> = (0..k)
        .flat_map(|i| m.row(i).iter().map(move |c| (c, i)))
        .map(|(c, i)| (-(c - shift[i]) / tau).exp())
        .collect();
    let mut u = vec![1.0 / k as f64; k];
    let mut v = vec![0.0; l];
    let mut ktu = vec![0.0; l];
    let mut converged = false;
    let mut it = 0;
    while it < p.max_iter {
        it += 1;
        ktu.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..k {
            let row = &kern[i * l..(i + 1) * l];
            for (s, kij) in ktu.iter_mut().zip(row) {
                *s += kij * u[i];
            }
        }
        for j in 0..l {
            v[j] = b[j] / ktu[j];
        }
        let mut ratio: f64 = 1.0;
        for i in 0..k {
            let row = &kern[i * l..(i + 1) * l];
            let kv: f64 = row.iter().zip(&v).map(|(x, y)| x * y).sum();
            let nu = a[i] / kv;
            if !nu.is_finite() || nu <= 0.0 {
                return None;
            }
            let r = nu / u[i];
            ratio = ratio.max(r).max(1.0 / r);
            u[i] = nu;
        }
        if ratio.ln() < p.tol {
            converged = true;
            break;
        }
    }
    // Finish with a column sweep so the second marginal is matched exactly.
    ktu.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..k {
        for j in 0..l {
            ktu[j] += kern[i * l + j] * u[i];
        }
    }
    for j in 0..l {
        v[j] = b[j] / ktu[j];
    }
    if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return None;
    }
    Some(Scaled {
        f: (0..k).map(|i| tau * u[i].ln() + shift[i]).collect(),
        g: v.iter().map(|x| tau * x.ln()).collect(),
        iterations: it,
        converged,
    })
}

/// Scalings outside `exp(±ABSORB)` are folded into the potentials.
const ABSORB: f64 = 30.0;

/// Annealing starts at the `τ` where the largest cost spread is this many
/// multiples of `τ`, and divides `τ` by `ANNEAL_FACTOR` per stage.
const ANNEAL_START: f64 = 30.0;
const ANNEAL_FACTOR: f64 = 4.0;

/// Loose tolerance for the intermediate annealing stages.
const ANNEAL_TOL: f64 = 1e-3;

/// Log-stabilized Sinkhorn at `τ`.
///
/// A warm row potential is completed by its soft c-transform. Without one,
/// `τ` is annealed from a value where the kernel is well conditioned down to
/// the target, each stage warm-starting the next; only the last stage runs
/// to `p.tol`, so the fixed point is the one at `τ`.
fn stabilized_sinkhorn(a: &[f64], b: &[f64], m: &CostMatrix, tau: f64, p: &SinkhornParams, warm: Option<Vec<f64>>) -> Option<Scaled> {
    let (k, l) = (m.rows(), m.cols());
    if let Some(f) = warm {
        let g: Vec<f64> = (0..l)
            .map(|j| tau * (b[j].ln() - log_sum_exp((0..k).map(|i| (f[i] - m.get(i, j)) / tau))))
            .collect();
        return stabilized_stage(a, b, m, tau, p.tol, p.max_iter, f, g);
    }
    let f: Vec<f64> = (0..k).map(|i| m.row(i).iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let g: Vec<f64> = (0..l)
        .map(|j| (0..k).map(|i| m.get(i, j) - f[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let spread = (0..k)
        .flat_map(|i| (0..l).map(move |j| (i, j)))
        .map(|(i, j)| m.get(i, j) - f[i] - g[j])
        .fold(0.0, f64::max);
    let mut stages = Vec::new();
    let mut t = spread / ANNEAL_START;
    while t > tau {
        stages.push(t);
        t /= ANNEAL_FACTOR;
    }
    stages.reverse();
    let (mut f, mut g, mut used) = (f, g, 0);
    while let Some(t) = stages.pop() {
        let budget = p.max_iter.saturating_sub(used);
        let s = stabilized_stage(a, b, m, t, ANNEAL_TOL.max(p.tol), budget, f, g)?;
        used += s.iterations;
        (f, g) = (s.f, s.g);
    }
    let mut s = stabilized_stage(a, b, m, tau, p.tol, p.max_iter.saturating_sub(used), f, g)?;
    s.iterations += used;
    Some(s)
}

/// Kernel iteration on `exp((f_i + g_j − M_ij)/τ)` with the scalings absorbed
/// into `f`, `g` whenever they grow large.
#[allow(clippy::too_many_arguments)]
fn stabilized_stage(
    a: &[f64],
    b: &[f64],
    m: &CostMatrix,
    tau: f64,
    tol: f64,
    max_iter: usize,
    mut f: Vec<f64>,
    mut g: Vec<f64>,
) -> Option<Scaled> {
    let (k, l) = (m.rows(), m.cols());
    let build = |f: &[f64], g: &[f64], kern: &mut Vec<f64>| {
        kern.clear();
        for i in 0..k {
            kern.extend(m.row(i).iter().zip(g).map(|(c, gj)| ((f[i] + gj - c) / tau).exp()));
        }
    };
    let mut kern = Vec::with_capacity(k * l);
    build(&f, &g, &mut kern);
    let mut u = vec![1.0; k];
    let mut v = vec![1.0; l];
    let mut ktu = vec![0.0; l];
    let col_sweep = |kern: &[f64], u: &[f64], v: &mut [f64], ktu: &mut [f64]| -> bool {
        ktu.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..k {
            let ui = u[i];
            for (s, kij) in ktu.iter_mut().zip(&kern[i * l..(i + 1) * l]) {
                *s += kij * ui;
            }
        }
        for j in 0..l {
            v[j] = b[j] / ktu[j];
        }
        v.iter().all(|x| x.is_finite() && *x > 0.0)
    };
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        if !col_sweep(&kern, &u, &mut v, &mut ktu) {
            return None;
        }
        // Largest ratio max(r, 1/r) between new and old u; its log is the change.
        let mut ratio: f64 = 1.0;
        for i in 0..k {
            let kv: f64 = kern[i * l..(i + 1) * l].iter().zip(&v).map(|(x, y)| x * y).sum();
            let nu = a[i] / kv;
            if !nu.is_finite() || nu <= 0.0 {
                return None;
            }
            let r = nu / u[i];
            ratio = ratio.max(r).max(1.0 / r);
            u[i] = nu;
        }
        if ratio.ln() < tol {
            converged = true;
            break;
        }
        let (lo, hi) = ((-ABSORB).exp(), ABSORB.exp());
        let large = |x: &f64| *x > hi || *x < lo;
        if u.iter().any(large) || v.iter().any(large) {
            for i in 0..k {
                f[i] += tau * u[i].ln();
                u[i] = 1.0;
            }
            for j in 0..l {
                g[j] += tau * v[j].ln();
                v[j] = 1.0;
            }
            build(&f, &g, &mut kern);
        }
    }
    if !col_sweep(&kern, &u, &mut v, &mut ktu) {
        return None;
    }
    Some(Scaled {
        f: (0..k).map(|i| f[i] + tau * u[i].ln()).collect(),
        g: (0..l).map(|j| g[j] + tau * v[j].ln()).collect(),
        iterations: it,
        converged,
    })
}

fn log_sinkhorn(a: &[f64], b: &[f64], m: &CostMatrix, tau: f64, p: &SinkhornParams) -> Scaled {
    let (k, l) = (m.rows(), m.cols());
    let la: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; k];
    let mut g = vec![0.0; l];
    let col_update = |f: &[f64], g: &mut [f64]| {
        for j in 0..l {
            let lse = log_sum_exp((0..k).map(|i| (f[i] - m.get(i, j)) / tau));
            g[j] = tau * (lb[j] - lse);
        }
    };
    let mut converged = false;
    let mut it = 0;
    while it < p.max_iter {
        it += 1;
        col_update(&f, &mut g);
        let mut change: f64 = 0.0;
        for i in 0..k {
            let lse = log_sum_exp(m.row(i).iter().zip(&g).map(|(c, gj)| (gj - c) / tau));
            let nf = tau * (la[i] - lse);
            change = change.max((nf - f[i]).abs() / tau);
            f[i] = nf;
        }
        if change < p.tol {
            converged = true;
            break;
        }
    }
    col_update(&f, &mut g);
    Scaled {
        f,
        g,
        iterations: it,
        converged,
    }
}

/// Entropic plan between `a` and `b`, returned even when the iteration cap
/// was hit (`converged == false`). Zero-mass entries are pruned before
/// scaling and come back as zero rows/columns.
pub fn sinkhorn_lenient(a: &[f64], b: &[f64], m: &CostMatrix, tau: f64, p: &SinkhornParams) -> Result<TransportPlan> {
    sinkhorn_warm(a, b, m, tau, p, None)
}

/// [`sinkhorn_lenient`] started from a row potential, typically `dual_a` of
/// a plan for nearby marginals on the same cost matrix. Ignored when
/// log-space is switched off.
pub fn sinkhorn_warm(a: &[f64], b: &[f64], m: &CostMatrix, tau: f64, p: &SinkhornParams, warm: Option<&[f64]>) -> Result<TransportPlan> {
    check_problem(a, b, m)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("regularization must be positive, got {tau}")));
    }
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] > ZERO_MASS).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|&j| b[j] > ZERO_MASS).collect();
    let sub_a: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
    let sub_b: Vec<f64> = cols.iter().map(|&j| b[j]).collect();
    let sub_m = sub_matrix(m, &rows, &cols);

    let spread = (0..sub_m.rows())
        .map(|i| {
            let r = sub_m.row(i);
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            r.iter().copied().fold(0.0, f64::max) - lo
        })
        .fold(0.0, f64::max)
        / tau;
    if let Some(f) = warm {
        if f.len() != a.len() || f.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("warm potential must be finite with one entry per row".into()));
        }
    }
    let warm_rows = warm.map(|f| rows.iter().map(|&i| f[i]).collect::<Vec<f64>>());
    // The plain kernel is used while it is well conditioned, or whenever
    // log-space is switched off; it reports underflow as `None`.
    let scaled = match warm_rows {
        Some(f) if p.log_domain => stabilized_sinkhorn(&sub_a, &sub_b, &sub_m, tau, p, Some(f)),
        _ if spread <= KERNEL_EXPONENT_LIMIT || (!p.log_domain && spread <= KERNEL_UNDERFLOW) => {
            kernel_sinkhorn(&sub_a, &sub_b, &sub_m, tau, p)
        }
        _ => None,
    };
    let scaled = match scaled {
        Some(s) => s,
        None if p.log_domain => stabilized_sinkhorn(&sub_a, &sub_b, &sub_m, tau, p, None)
            .unwrap_or_else(|| log_sinkhorn(&sub_a, &sub_b, &sub_m, tau, p)),
        None => return Err(Error::RegularizationTooSmall),
    };

    let (k, l) = (a.len(), b.len());
    let mut coupling = vec![0.0; k * l];
    for (si, &i) in rows.iter().enumerate() {
        for (sj, &j) in cols.iter().enumerate() {
            coupling[i * l + j] = ((scaled.f[si] + scaled.g[sj] - m.get(i, j)) / tau).exp();
        }
    }
    // Pruned entries get the soft c-transform of the opposite potential.
    let mut f_full = vec![0.0; k];
    for (si, &i) in rows.iter().enumerate() {
        f_full[i] = scaled.f[si];
    }
    for i in (0..k).filter(|i| !rows.contains(i)) {
        f_full[i] = -tau * log_sum_exp(cols.iter().enumerate().map(|(sj, &j)| (scaled.g[sj] - m.get(i, j)) / tau));
    }
    let mut g_full = vec![0.0; l];
    for (sj, &j) in cols.iter().enumerate() {
        g_full[j] = scaled.g[sj];
    }
    for j in (0..l).filter(|j| !cols.contains(j)) {
        g_full[j] = -tau * log_sum_exp(rows.iter().enumerate().map(|(si, &i)| (scaled.f[si] - m.get(i, j)) / tau));
    }

    let cost = coupling.iter().zip(m.data()).map(|(t, c)| t * c).sum();
    let mut plan = TransportPlan {
        rows: k,
        cols: l,
        coupling,
        cost,
        dual_a: Some(center(f_full)),
        dual_b: Some(center(g_full)),
        regularization: tau,
        converged: scaled.converged,
        iterations: scaled.iterations,
        marginal_residual: 0.0,
    };
    plan.marginal_residual = marginal_residual(&plan, a, b);
    Ok(plan)
}

/// Entropic optimal plan `diag(u) K diag(v)` with `K = exp(−M/τ)`.
///
/// Errors when the scaling does not settle within `max_iter` sweeps.
pub fn sinkhorn(a: &[f64], b: &[f64], m: &CostMatrix, tau: f64, p: &SinkhornParams) -> Result<TransportPlan> {
    let plan = sinkhorn_lenient(a, b, m, tau, p)?;
    if !plan.converged {
        return Err(Error::SinkhornNotConverged {
            iterations: plan.iterations,
            residual: plan.marginal_residual,
        });
    }
    Ok(plan)
}

fn sub_matrix(m: &CostMatrix, rows: &[usize], cols: &[usize]) -> CostMatrix {
    if rows.len() == m.rows() && cols.len() == m.cols() {
        return m.clone();
    }
    let data = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| m.get(i, j)))
        .collect();
    CostMatrix::from_raw(rows.len(), cols.len(), data).expect("submatrix of a valid cost matrix")
}

pub(crate) fn marginal_residual(plan: &TransportPlan, a: &[f64], b: &[f64]) -> f64 {
    let r = plan.row_sums().iter().zip(a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let c = plan.col_sums().iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    r.max(c)
}

/// How transport costs are computed inside the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OtMode {
    Exact,
    Entropic {
        tau: f64,
        /// Add `τ·KL(T | a⊗b)` to the compared value instead of the bare
        /// plan cost.
        include_entropy: bool,
    },
}

impl OtMode {
    pub fn entropic(tau: f64) -> Self {
        OtMode::Entropic {
            tau,
            include_entropy: false,
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            OtMode::Exact => None,
            OtMode::Entropic { tau, .. } => Some(*tau),
        }
    }
}

/// Optimal plan for the given mode. Entropic plans are returned even when the
/// iteration cap was hit.
pub fn solve_plan(a: &[f64], b: &[f64], m: &CostMatrix, mode: OtMode, p: &SinkhornParams) -> Result<TransportPlan> {
    solve_plan_warm(a, b, m, mode, p, None)
}

/// [`solve_plan`] with an entropic warm start from a previous plan on the
/// same cost matrix; exact solves ignore it.
pub fn solve_plan_warm(a: &[f64], b: &[f64], m: &CostMatrix, mode: OtMode, p: &SinkhornParams, warm: Option<&TransportPlan>) -> Result<TransportPlan> {
    match mode {
        OtMode::Exact => exact_ot(a, b, m),
        OtMode::Entropic { tau, .. } => sinkhorn_warm(a, b, m, tau, p, warm.and_then(|t| t.dual_a.as_deref())),
    }
}

/// The value the solvers compare and minimize for a plan: the plan cost,
/// optionally with the entropy penalty.
pub fn plan_value(plan: &TransportPlan, a: &[f64], b: &[f64], mode: OtMode) -> f64 {
    match mode {
        OtMode::Entropic {
            tau,
            include_entropy: true,
        } => plan.cost + tau * plan.relative_entropy(a, b),
        _ => plan.cost,
    }
}

/// Breakdown of a Wasserstein evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WassersteinReport {
    /// `W_r` (exact) or `Ŵ_r` (entropic).
    pub distance: f64,
    /// `⟨T, M⟩` of the returned plan.
    pub plan_cost: f64,
    /// `⟨T, M⟩ + τ·KL(T | a⊗b)`; equals `plan_cost` in exact mode.
    pub regularized: f64,
}

pub fn wasserstein_report(
    g: &DiscreteMeasure,
    h: &DiscreteMeasure,
    order: Order,
    mode: OtMode,
    p: &SinkhornParams,
) -> Result<WassersteinReport> {
    g.check_dim(h)?;
    let m = cost_matrix(g.atoms(), h.atoms(), order)?;
    let report = match mode {
        OtMode::Exact => {
            let plan = exact_ot(g.weights(), h.weights(), &m)?;
            WassersteinReport {
                distance: order.root(plan.cost),
                plan_cost: plan.cost,
                regularized: plan.cost,
            }
        }
        OtMode::Entropic { tau, .. } => {
            let plan = sinkhorn(g.weights(), h.weights(), &m, tau, p)?;
            let reg = plan.cost + tau * plan.relative_entropy(g.weights(), h.weights());
            WassersteinReport {
                distance: order.root(reg),
                plan_cost: plan.cost,
                regularized: reg,
            }
        }
    };
    Ok(report)
}

/// `W_r(G, G′)` in exact mode, `Ŵ_r` with the entropy penalty in entropic mode.
pub fn wasserstein(g: &DiscreteMeasure, h: &DiscreteMeasure, order: Order, mode: OtMode) -> Result<f64> {
    Ok(wasserstein_report(g, h, order, mode, &SinkhornParams::default())?.distance)
}

/// `W_r^r` between two measures in exact mode.
pub fn exact_cost(g: &DiscreteMeasure, h: &DiscreteMeasure, order: Order) -> Result<f64> {
    g.check_dim(h)?;
    let m = cost_matrix(g.atoms(), h.atoms(), order)?;
    Ok(exact_ot(g.weights(), h.weights(), &m)?.cost)
}
