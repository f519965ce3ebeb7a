//! Exact transport: transportation simplex on the spanning-tree basis, plus
//! an enumerative vertex search for very small instances.

use crate::error::{Error, Result};
use crate::measure::CostMatrix;

use super::{check_problem, marginal_residual, TransportPlan};

/// Largest number of candidate bases the enumerative path will visit.
pub const ENUMERATION_LIMIT: u64 = 200_000;

/// Exact plan for small instances. Uses vertex enumeration (ties resolved to
/// the lexicographically smallest flattened coupling) when `k·k′ ≤ 64` and the
/// basis count is at most [`ENUMERATION_LIMIT`]; otherwise the simplex path.
pub fn exact_ot_small(a: &[f64], b: &[f64], m: &CostMatrix) -> Result<TransportPlan> {
    check_problem(a, b, m)?;
    let (k, l) = (a.len(), b.len());
    if k * l <= 64 && binomial((k * l) as u64, (k + l - 1) as u64) <= ENUMERATION_LIMIT {
        enumerate_vertices(a, b, m)
    } else {
        transportation_simplex(a, b, m)
    }
}

/// Exact plan by the transportation simplex, any size.
pub fn exact_ot(a: &[f64], b: &[f64], m: &CostMatrix) -> Result<TransportPlan> {
    check_problem(a, b, m)?;
    transportation_simplex(a, b, m)
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Solves for the flows on a candidate basis by leaf elimination. Returns
/// `None` when the cells do not form a spanning tree of the bipartite graph.
fn tree_flows(a: &[f64], b: &[f64], cells: &[(usize, usize)]) -> Option<Vec<f64>> {
    let (k, l) = (a.len(), b.len());
    let mut supply: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut degree = vec![0usize; k + l];
    for &(i, j) in cells {
        degree[i] += 1;
        degree[k + j] += 1;
    }
    let mut alive = vec![true; cells.len()];
    let mut flows = vec![0.0; cells.len()];
    for _ in 0..cells.len() {
        // Any node of degree one pins the flow on its single live edge.
        let leaf = (0..k + l).find(|&v| degree[v] == 1)?;
        let e = (0..cells.len()).find(|&e| alive[e] && (cells[e].0 == leaf || k + cells[e].1 == leaf))?;
        let (i, j) = cells[e];
        let other = if i == leaf { k + j } else { i };
        let x = supply[leaf];
        flows[e] = x;
        supply[other] -= x;
        supply[leaf] = 0.0;
        alive[e] = false;
        degree[i] -= 1;
        degree[k + j] -= 1;
    }
    if degree.iter().any(|d| *d != 0) {
        return None;
    }
    Some(flows)
}

fn enumerate_vertices(a: &[f64], b: &[f64], m: &CostMatrix) -> Result<TransportPlan> {
    let (k, l) = (a.len(), b.len());
    let n = k * l;
    let r = k + l - 1;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..r).collect();
    let scale = 1.0 + m.max();
    loop {
        let cells: Vec<(usize, usize)> = idx.iter().map(|&c| (c / l, c % l)).collect();
        if let Some(flows) = tree_flows(a, b, &cells) {
            if flows.iter().all(|x| *x >= -1e-12) {
                let mut t = vec![0.0; n];
                for (&c, x) in idx.iter().zip(&flows) {
                    t[c] = x.max(0.0);
                }
                let cost: f64 = t.iter().zip(m.data()).map(|(x, c)| x * c).sum();
                let better = match &best {
                    None => true,
                    Some((bc, bt)) => {
                        if cost < bc - 1e-12 * scale {
                            true
                        } else if cost <= bc + 1e-12 * scale {
                            lex_less(&t, bt)
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((cost, t));
                }
            }
        }
        // Next r-combination of 0..n in lexicographic order.
        let mut p = r;
        loop {
            if p == 0 {
                let (_, t) = best.ok_or_else(|| Error::Infeasible("no feasible vertex".into()))?;
                return Ok(finish(a, b, m, t, None));
            }
            p -= 1;
            if idx[p] < n - r + p {
                idx[p] += 1;
                for q in p + 1..r {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

fn lex_less(x: &[f64], y: &[f64]) -> bool {
    for (a, b) in x.iter().zip(y) {
        if (a - b).abs() > 1e-12 {
            return a < b;
        }
    }
    false
}

fn finish(a: &[f64], b: &[f64], m: &CostMatrix, coupling: Vec<f64>, duals: Option<(Vec<f64>, Vec<f64>)>) -> TransportPlan {
    let cost = coupling.iter().zip(m.data()).map(|(x, c)| x * c).sum();
    let (dual_a, dual_b) = match duals {
        Some((u, v)) => {
            // Shift so the column potential has zero mean; u + v is preserved.
            let s = v.iter().sum::<f64>() / v.len() as f64;
            (Some(u.iter().map(|x| x + s).collect()), Some(v.iter().map(|x| x - s).collect()))
        }
        None => (None, None),
    };
    let mut plan = TransportPlan {
        rows: a.len(),
        cols: b.len(),
        coupling,
        cost,
        dual_a,
        dual_b,
        regularization: 0.0,
        converged: true,
        iterations: 0,
        marginal_residual: 0.0,
    };
    plan.marginal_residual = marginal_residual(&plan, a, b);
    plan
}

/// Basis of the transportation simplex: `k + l − 1` cells forming a
/// spanning tree over row nodes `0..k` and column nodes `k..k+l`.
struct Basis {
    k: usize,
    l: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Basis {
    fn northwest(a: &[f64], b: &[f64]) -> Self {
        let (k, l) = (a.len(), b.len());
        let mut ra = a.to_vec();
        let mut rb = b.to_vec();
        let (mut i, mut j) = (0, 0);
        let mut cells = Vec::with_capacity(k + l - 1);
        let mut flow = Vec::with_capacity(k + l - 1);
        loop {
            let x = ra[i].min(rb[j]);
            cells.push((i, j));
            flow.push(x);
            ra[i] -= x;
            rb[j] -= x;
            if i == k - 1 && j == l - 1 {
                break;
            }
            // Advance exactly one index so the cell count stays k + l − 1.
            if j == l - 1 || (i < k - 1 && ra[i] <= rb[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        // The last cell absorbs rounding drift from the greedy sweep.
        Self { k, l, cells, flow }
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.k + self.l];
        for (e, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.k + j, e));
            adj[self.k + j].push((i, e));
        }
        adj
    }

    fn potentials(&self, m: &CostMatrix, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; self.k + self.l];
        pot[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            for &(w, e) in &adj[v] {
                if pot[w].is_nan() {
                    let (i, j) = self.cells[e];
                    pot[w] = m.get(i, j) - pot[v];
                    stack.push(w);
                }
            }
        }
        (pot[..self.k].to_vec(), pot[self.k..].to_vec())
    }

    /// Cells on the tree path from row node `i` to column node `k + j`.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let target = self.k + j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.k + self.l];
        let mut seen = vec![false; self.k + self.l];
        seen[i] = true;
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            if v == target {
                break;
            }
            for &(w, e) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((v, e));
                    stack.push(w);
                }
            }
        }
        let mut edges = Vec::new();
        let mut v = target;
        while v != i {
            let (p, e) = parent[v].expect("basis is a spanning tree");
            edges.push(e);
            v = p;
        }
        // Ordered from the column end: first edge touches column j.
        edges
    }
}

fn transportation_simplex(a: &[f64], b: &[f64], m: &CostMatrix) -> Result<TransportPlan> {
    let (k, l) = (a.len(), b.len());
    let mut basis = Basis::northwest(a, b);
    let scale = 1.0 + m.max();
    let eps = 1e-12 * scale;
    let max_pivots = 50 * (k + l) * (k + l) + 1000;
    let mut degenerate_run = 0usize;
    for _ in 0..max_pivots {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(m, &adj);
        let in_basis = {
            let mut mask = vec![false; k * l];
            for &(i, j) in &basis.cells {
                mask[i * l + j] = true;
            }
            mask
        };
        // Dantzig pricing; Bland's lowest-index rule once pivots stall.
        let bland = degenerate_run > k + l;
        let mut entering = None;
        let mut best = -eps;
        'scan: for i in 0..k {
            for j in 0..l {
                if in_basis[i * l + j] {
                    continue;
                }
                let rc = m.get(i, j) - u[i] - v[j];
                if rc < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = rc;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let mut t = vec![0.0; k * l];
            for (&(i, j), &x) in basis.cells.iter().zip(&basis.flow) {
                t[i * l + j] += x.max(0.0);
            }
            return Ok(finish(a, b, m, t, Some((u, v))));
        };
        // Cycle: entering cell (+), then alternating signs along the path
        // from column ej back to row ei.
        let path = basis.path(&adj, ei, ej);
        let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
        let plus: Vec<usize> = path.iter().copied().skip(1).step_by(2).collect();
        let mut leave = minus[0];
        for &e in &minus[1..] {
            let (x, y) = (basis.flow[e], basis.flow[leave]);
            if x < y || (x == y && basis.cells[e] < basis.cells[leave]) {
                leave = e;
            }
        }
        let theta = basis.flow[leave].max(0.0);
        degenerate_run = if theta <= 0.0 { degenerate_run + 1 } else { 0 };
        for &e in &minus {
            basis.flow[e] -= theta;
        }
        for &e in &plus {
            basis.flow[e] += theta;
        }
        basis.cells[leave] = (ei, ej);
        basis.flow[leave] = theta;
    }
    Err(Error::Infeasible("transportation simplex exceeded its pivot budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{cost_matrix, Order};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn two_diracs() {
        let m = cost_matrix(&[vec![0.0, 0.0]], &[vec![3.0, 4.0]], Order::Two).unwrap();
        for plan in [exact_ot_small(&[1.0], &[1.0], &m).unwrap(), exact_ot(&[1.0], &[1.0], &m).unwrap()] {
            assert_eq!(plan.cost, 25.0);
            assert_eq!(plan.regularization, 0.0);
        }
    }

    #[test]
    fn uniform_three_matches_best_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let data: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..10.0)).collect();
            let m = CostMatrix::from_raw(3, 3, data).unwrap();
            let w = [1.0 / 3.0; 3];
            let oracle = permutations(3)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| m.get(i, j)).sum::<f64>() / 3.0)
                .fold(f64::INFINITY, f64::min);
            assert!((exact_ot_small(&w, &w, &m).unwrap().cost - oracle).abs() < 1e-12);
            assert!((exact_ot(&w, &w, &m).unwrap().cost - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_sorted_matching() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..8 {
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let xs: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
            let ys: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
            let w = vec![1.0 / n as f64; n];
            for order in [Order::One, Order::Two] {
                let m = cost_matrix(&xs, &ys, order).unwrap();
                x.sort_by(f64::total_cmp);
                y.sort_by(f64::total_cmp);
                let oracle: f64 = x.iter().zip(&y).map(|(p, q)| order.cost_from_sq((p - q) * (p - q))).sum::<f64>() / n as f64;
                assert!((exact_ot(&w, &w, &m).unwrap().cost - oracle).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn enumeration_prefers_lexicographically_smallest_optimum() {
        // All couplings cost the same; the smallest flattened vertex puts
        // the first row's mass in the last column.
        let m = CostMatrix::from_raw(2, 2, vec![1.0; 4]).unwrap();
        let plan = exact_ot_small(&[0.5, 0.5], &[0.5, 0.5], &m).unwrap();
        assert_eq!(plan.coupling, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn rejects_off_simplex_marginals() {
        let m = CostMatrix::from_raw(2, 2, vec![1.0; 4]).unwrap();
        assert!(exact_ot(&[0.5, 0.6], &[0.5, 0.5], &m).is_err());
        assert!(exact_ot_small(&[0.5, 0.5], &[1.5, -0.5], &m).is_err());
    }

    #[test]
    fn duals_certify_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let (k, l) = (rng.random_range(1..8), rng.random_range(1..8));
            let data: Vec<f64> = (0..k * l).map(|_| rng.random_range(0.0..4.0)).collect();
            let m = CostMatrix::from_raw(k, l, data).unwrap();
            let a = random_simplex(&mut rng, k);
            let b = random_simplex(&mut rng, l);
            let p = exact_ot(&a, &b, &m).unwrap();
            let (u, v) = (p.dual_a.clone().unwrap(), p.dual_b.clone().unwrap());
            let dual: f64 = u.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>() + v.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>();
            assert!((dual - p.cost).abs() < 1e-9);
            for i in 0..k {
                for j in 0..l {
                    assert!(m.get(i, j) - u[i] - v[j] >= -1e-9);
                }
            }
        }
    }

    #[test]
    fn degenerate_marginals_terminate() {
        // Equal supplies and demands make every NW-corner pivot degenerate.
        let n = 12;
        let w = vec![1.0 / n as f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(0..3) as f64).collect();
        let m = CostMatrix::from_raw(n, n, data).unwrap();
        let p = exact_ot(&w, &w, &m).unwrap();
        assert!(p.marginal_residual < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn simplex_agrees_with_enumeration(seed in any::<u64>(), k in 1usize..5, l in 1usize..5, zeros in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..k * l).map(|_| rng.random_range(0.0..3.0)).collect();
            let m = CostMatrix::from_raw(k, l, data).unwrap();
            let mut a = random_simplex(&mut rng, k);
            if zeros && k > 1 {
                a[0] = 0.0;
                let s: f64 = a.iter().sum();
                a.iter_mut().for_each(|x| *x /= s);
            }
            let b = random_simplex(&mut rng, l);
            let e = exact_ot_small(&a, &b, &m).unwrap();
            let s = exact_ot(&a, &b, &m).unwrap();
            prop_assert!((e.cost - s.cost).abs() < 1e-10);
            prop_assert!(e.marginal_residual < 1e-12);
            prop_assert!(s.marginal_residual < 1e-12);
            prop_assert!(s.coupling.iter().all(|x| *x >= 0.0));
        }
    }
}
