//! Brute-force check that clustering measures as a measure of measures and
//! as a tuple of `M` centers give the same optimal value.
//!
//! Both values are found by enumerating every partition of the groups into
//! at most `M` cells and taking exact `W₂` barycenters of each cell. This is
//! a test oracle for tiny instances only.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::barycenter::exact_w2_barycenter;
use crate::error::{Error, Result};
use crate::measure::{CostMatrix, DiscreteMeasure, Order};
use crate::runtime::stream_rng;
use crate::transport::{exact_cost, exact_ot};

pub const MAX_GROUPS: usize = 5;
pub const MAX_CLUSTERS: usize = 3;

/// Optimal values of the two formulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `min_𝓗 W₂²(𝓗, (1/m) Σ_j δ_{G_j})` over measures with at most `M` atoms.
    pub measure_of_measures: f64,
    /// `(1/m) min_H Σ_j min_i W₂²(G_j, H_i)`.
    pub tuple_form: f64,
}

impl EquivalenceReport {
    pub fn gap(&self) -> f64 {
        (self.measure_of_measures - self.tuple_form).abs()
    }

    pub fn agrees(&self, tol: f64) -> bool {
        self.gap() <= tol
    }
}

/// Set partitions of `0..n` into exactly `cells` nonempty cells, as
/// restricted growth strings.
fn partitions(n: usize, cells: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, n: usize, cells: usize, used: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == n {
            if used == cells {
                out.push(cur.clone());
            }
            return;
        }
        // Not enough positions left to open the missing cells.
        if cells - used > n - pos {
            return;
        }
        for c in 0..=used.min(cells - 1) {
            cur.push(c);
            rec(pos + 1, n, cells, used.max(c + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, cells, 0, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Both optimal values for `locals` with `clusters` global centers.
pub fn equivalence_check(locals: &[DiscreteMeasure], clusters: usize) -> Result<EquivalenceReport> {
    let m = locals.len();
    if m == 0 {
        return Err(Error::EmptyPointSet);
    }
    if m > MAX_GROUPS || clusters > MAX_CLUSTERS || clusters == 0 {
        return Err(Error::InstanceTooLarge(format!(
            "equivalence check needs 1 <= M <= {MAX_CLUSTERS} and m <= {MAX_GROUPS}, got M = {clusters}, m = {m}"
        )));
    }
    for g in &locals[1..] {
        locals[0].check_dim(g)?;
    }
    let cells = clusters.min(m);
    let mut best_measure = f64::INFINITY;
    let mut best_tuple = f64::INFINITY;
    for labels in partitions(m, cells) {
        let mut centers = Vec::with_capacity(cells);
        let mut sizes = Vec::with_capacity(cells);
        for c in 0..cells {
            let cell: Vec<DiscreteMeasure> = (0..m).filter(|&j| labels[j] == c).map(|j| locals[j].clone()).collect();
            let mix = vec![1.0 / cell.len() as f64; cell.len()];
            centers.push(exact_w2_barycenter(&cell, &mix)?.0);
            sizes.push(cell.len());
        }
        let mut dist = Vec::with_capacity(cells * m);
        for h in &centers {
            for g in locals {
                dist.push(exact_cost(h, g, Order::Two)?);
            }
        }
        let tuple: f64 = (0..m)
            .map(|j| (0..cells).map(|c| dist[c * m + j]).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / m as f64;
        let cost = CostMatrix::from_raw(cells, m, dist)?;
        let a: Vec<f64> = sizes.iter().map(|&s| s as f64 / m as f64).collect();
        let b = vec![1.0 / m as f64; m];
        let outer = exact_ot(&a, &b, &cost)?.cost;
        best_measure = best_measure.min(outer);
        best_tuple = best_tuple.min(tuple);
    }
    Ok(EquivalenceReport {
        measure_of_measures: best_measure,
        tuple_form: best_tuple,
    })
}

/// Random tiny instance: up to `max_groups` groups of 1 to `max_atoms`
/// atoms in the plane, and `1..=max_clusters` clusters.
pub fn random_tiny_instance(seed: u64, max_groups: usize, max_clusters: usize, max_atoms: usize) -> (Vec<DiscreteMeasure>, usize) {
    let mut rng = stream_rng(seed, 0x5e);
    let m = rng.random_range(2..=max_groups.max(2));
    let clusters = rng.random_range(1..=max_clusters.max(1));
    let locals = (0..m)
        .map(|_| {
            let k = rng.random_range(1..=max_atoms.max(1));
            let atoms: Vec<Vec<f64>> = (0..k).map(|_| (0..2).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let masses: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            DiscreteMeasure::from_masses(atoms, masses).expect("positive masses")
        })
        .collect();
    (locals, clusters)
}
