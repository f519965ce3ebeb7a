//! Clustering evaluation: information-theoretic and pair-counting scores on
//! label vectors, and Wasserstein distances between fitted and true measures.
//!
//! Entropies use natural logarithms.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Order};
use crate::multilevel::MultilevelState;
use crate::transport::exact_cost;

/// Contingency counts between two labelings with relabeled (dense) classes.
struct Contingency {
    n: usize,
    table: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let (ia, ka) = dense(a);
    let (ib, kb) = dense(b);
    let mut table = vec![vec![0usize; kb]; ka];
    for (x, y) in ia.iter().zip(&ib) {
        table[*x][*y] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        n: a.len(),
        table,
        rows,
        cols,
    })
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|c| **c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(c: &Contingency) -> f64 {
    let n = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Normalized mutual information `2·MI / (H(a) + H(b))`; two constant
/// labelings score 1.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let h = entropy(&c.rows, c.n) + entropy(&c.cols, c.n);
    if h == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * mutual_information(&c) / h).clamp(0.0, 1.0))
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. When the expected and maximal index coincide (both
/// labelings trivial) the score is 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let index: f64 = c.table.iter().flatten().map(|&x| choose2(x)).sum();
    let sa: f64 = c.rows.iter().map(|&x| choose2(x)).sum();
    let sb: f64 = c.cols.iter().map(|&x| choose2(x)).sum();
    let total = choose2(c.n);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// `ln k!` for `k = 0..=n`.
fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Expected mutual information under the hypergeometric model with the
/// observed marginals.
fn expected_mutual_information(rows: &[usize], cols: &[usize], n: usize) -> f64 {
    let lf = log_factorials(n);
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in rows {
        for &bj in cols {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let term = nij as f64 / nf * (nf * nij as f64 / (ai as f64 * bj as f64)).ln();
                let log_p = lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj]
                    - lf[n]
                    - lf[nij]
                    - lf[ai - nij]
                    - lf[bj - nij]
                    - lf[n + nij - ai - bj];
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information `(MI − E[MI]) / (max(H(a), H(b)) − E[MI])`.
/// A vanishing denominator gives 1 for identical partitions and 0 otherwise.
pub fn ami(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let mi = mutual_information(&c);
    let ha = entropy(&c.rows, c.n);
    let hb = entropy(&c.cols, c.n);
    let emi = expected_mutual_information(&c.rows, &c.cols, c.n);
    let denom = ha.max(hb) - emi;
    if denom.abs() < 1e-12 {
        let same = c.table.iter().all(|r| r.iter().filter(|x| **x > 0).count() <= 1)
            && (0..c.cols.len()).all(|j| c.table.iter().filter(|r| r[j] > 0).count() <= 1);
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((mi - emi) / denom)
}

fn w2(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    Ok(exact_cost(a, b, Order::Two)?.max(0.0).sqrt())
}

/// `max(d̄(A, B), d̄(B, A))` with `d̄(A, B) = max_i min_j W₂(A_i, B_j)`.
pub fn min_matching_distance(a: &[DiscreteMeasure], b: &[DiscreteMeasure]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let mut dist = vec![vec![0.0; b.len()]; a.len()];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            dist[i][j] = w2(x, y)?;
        }
    }
    let ab = dist.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let ba = (0..b.len())
        .map(|j| dist.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(ab.max(ba))
}

/// `(1/m) Σ_j W₂(Ĝ_j, G_j) + min_matching_distance(Ĥ, H)`, all exact.
pub fn wasserstein_to_truth(
    locals: &[DiscreteMeasure],
    globals: &[DiscreteMeasure],
    true_locals: &[DiscreteMeasure],
    true_globals: &[DiscreteMeasure],
) -> Result<f64> {
    if locals.len() != true_locals.len() {
        return Err(Error::LengthMismatch {
            left: locals.len(),
            right: true_locals.len(),
        });
    }
    if locals.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let mut local = 0.0;
    for (g, t) in locals.iter().zip(true_locals) {
        local += w2(g, t)?;
    }
    Ok(local / locals.len() as f64 + min_matching_distance(globals, true_globals)?)
}

/// [`wasserstein_to_truth`] for a fitted state.
pub fn state_to_truth(state: &MultilevelState, true_locals: &[DiscreteMeasure], true_globals: &[DiscreteMeasure]) -> Result<f64> {
    wasserstein_to_truth(&state.locals, &state.globals, true_locals, true_globals)
}
