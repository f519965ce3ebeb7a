//! Dense two-phase simplex for small equality-form linear programs
//! `min cᵀx  s.t.  A x = b, x ≥ 0`. Bland's rule keeps it cycle-free.
//! Meant for tiny exact sub-problems, not for throughput.

use crate::error::{Error, Result};

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        self.t[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost` restricted to columns where `allowed` is true.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        let limit = 10_000 + 100 * self.cols;
        for _ in 0..limit {
            let reduced = |j: usize| -> f64 {
                cost[j]
                    - self
                        .basis
                        .iter()
                        .zip(&self.t)
                        .map(|(&bj, row)| cost[bj] * row[j])
                        .sum::<f64>()
            };
            let Some(enter) = (0..self.cols).find(|&j| allowed[j] && !self.basis.contains(&j) && reduced(j) < -EPS) else {
                return Ok(());
            };
            let rhs = self.cols;
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[enter] > EPS {
                    let ratio = row[rhs] / row[enter];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Lp("objective is unbounded".into()));
            };
            self.pivot(r, enter);
        }
        Err(Error::Lp("pivot limit reached".into()))
    }
}

/// Solves `min cᵀx` subject to `A x = b`, `x ≥ 0`, with `A` given row-wise.
pub fn solve_equality_lp(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(Error::LengthMismatch { left: row.len(), right: n });
    }
    let rows = a.len();
    let cols = n + rows;
    let mut t = Vec::with_capacity(rows);
    for (i, (row, &rhs)) in a.iter().zip(b).enumerate() {
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        let mut r: Vec<f64> = row.iter().map(|v| sign * v).collect();
        r.extend((0..rows).map(|q| if q == i { 1.0 } else { 0.0 }));
        r.push(sign * rhs);
        t.push(r);
    }
    let mut tab = Tableau {
        t,
        basis: (n..cols).collect(),
        cols,
    };

    let phase1: Vec<f64> = (0..cols).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    tab.optimize(&phase1, &vec![true; cols])?;
    let infeasibility: f64 = tab.basis.iter().zip(&tab.t).filter(|(bj, _)| **bj >= n).map(|(_, r)| r[cols]).sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeasibility > 1e-8 * scale {
        return Err(Error::Infeasible(format!("phase one residual {infeasibility:e}")));
    }

    // Drive artificials out of the basis; rows where that is impossible are
    // redundant and dropped.
    let mut r = 0;
    while r < tab.t.len() {
        if tab.basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[r][j].abs() > EPS) {
                tab.pivot(r, j);
                r += 1;
            } else {
                tab.t.remove(r);
                tab.basis.remove(r);
            }
        } else {
            r += 1;
        }
    }

    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, rows));
    let allowed: Vec<bool> = (0..cols).map(|j| j < n).collect();
    tab.optimize(&cost, &allowed)?;

    let mut x = vec![0.0; n];
    for (&bj, row) in tab.basis.iter().zip(&tab.t) {
        if bj < n {
            x[bj] = row[cols].max(0.0);
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Ok(LpSolution { x, objective })
}
