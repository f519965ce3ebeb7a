//! Finite discrete probability measures, pairwise cost matrices and the
//! grouped-dataset container consumed by every solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a measure before construction rejects it.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Exponent `r` of the ground cost `‖x − y‖^r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Order {
    pub fn exponent(self) -> u32 {
        match self {
            Order::One => 1,
            Order::Two => 2,
        }
    }

    /// Cost of a pair at squared Euclidean distance `sq`.
    #[inline]
    pub fn cost_from_sq(self, sq: f64) -> f64 {
        match self {
            Order::One => sq.sqrt(),
            Order::Two => sq,
        }
    }

    /// Inverse of the `r`-th power: turns a transport cost into a distance.
    pub fn root(self, cost: f64) -> f64 {
        match self {
            Order::One => cost,
            Order::Two => cost.max(0.0).sqrt(),
        }
    }
}

impl TryFrom<u32> for Order {
    type Error = Error;

    fn try_from(r: u32) -> Result<Self> {
        match r {
            1 => Ok(Order::One),
            2 => Ok(Order::Two),
            _ => Err(Error::InvalidParameter(format!("order must be 1 or 2, got {r}"))),
        }
    }
}

#[inline]
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Deserialize)]
struct RawMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// A probability measure `Σ w_i δ_{x_i}` with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms, raw.weights)
    }
}

impl DiscreteMeasure {
    /// Validates and builds a measure. Weights within `1e-9` of the simplex
    /// are renormalized once; anything further off is rejected.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: atoms.len(),
                right: weights.len(),
            });
        }
        let d = atoms[0].len();
        if d == 0 {
            return Err(Error::InvalidParameter("atoms must have dimension >= 1".into()));
        }
        for a in &atoms {
            if a.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.len(),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite atom coordinate".into()));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, expected 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { atoms, weights })
    }

    /// Builds a measure from arbitrary positive masses by normalizing them.
    pub fn from_masses(atoms: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidWeights(format!("total mass {total} is not positive")));
        }
        let weights = masses.into_iter().map(|w| w / total).collect();
        Self::new(atoms, weights)
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn into_parts(self) -> (Vec<Vec<f64>>, Vec<f64>) {
        (self.atoms, self.weights)
    }

    /// Weighted mean of the atoms.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (mi, ai) in m.iter_mut().zip(a) {
                *mi += w * ai;
            }
        }
        m
    }

    /// Drops atoms whose weight is at most `threshold` and renormalizes.
    /// The heaviest atom always survives.
    pub fn pruned(&self, threshold: f64) -> Self {
        let keep: Vec<usize> = (0..self.atoms.len())
            .filter(|&i| self.weights[i] > threshold)
            .collect();
        let keep = if keep.is_empty() {
            vec![argmax(&self.weights)]
        } else {
            keep
        };
        let total: f64 = keep.iter().map(|&i| self.weights[i]).sum();
        Self {
            atoms: keep.iter().map(|&i| self.atoms[i].clone()).collect(),
            weights: keep.iter().map(|&i| self.weights[i] / total).collect(),
        }
    }

    /// Merges atoms with exactly equal coordinates, keeping first-seen order.
    pub fn aggregated(&self) -> Self {
        let (atoms, weights) = aggregate(self.atoms.iter().cloned().zip(self.weights.iter().copied()));
        Self { atoms, weights }
    }

    pub(crate) fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn bits(p: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 compare equal, so normalize the sign of zero first.
    p.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

fn aggregate(items: impl Iterator<Item = (Vec<f64>, f64)>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut index = std::collections::HashMap::new();
    let mut atoms = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for (p, w) in items {
        match index.entry(bits(&p)) {
            std::collections::hash_map::Entry::Occupied(e) => masses[*e.get()] += w,
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(atoms.len());
                atoms.push(p);
                masses.push(w);
            }
        }
    }
    (atoms, masses)
}

/// Empirical measure `(1/n) Σ δ_{X_i}`; exactly equal points share one atom.
pub fn make_empirical(points: &[Vec<f64>]) -> Result<DiscreteMeasure> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let n = points.len() as f64;
    let (atoms, counts) = aggregate(points.iter().map(|p| (p.clone(), 1.0)));
    let weights = counts.into_iter().map(|c| c / n).collect();
    DiscreteMeasure::new(atoms, weights)
}

/// Dense row-major matrix of pairwise transport costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    order: Option<Order>,
}

impl CostMatrix {
    /// Wraps an arbitrary nonnegative cost table (not necessarily a power of
    /// a Euclidean distance).
    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyPointSet);
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter("costs must be finite and nonnegative".into()));
        }
        Ok(Self {
            rows,
            cols,
            data,
            order: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn order(&self) -> Option<Order> {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
            order: self.order,
        }
    }
}

/// `entries[i][j] = ‖X_i − Y_j‖^r`.
pub fn cost_matrix(x: &[Vec<f64>], y: &[Vec<f64>], order: Order) -> Result<CostMatrix> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let d = x[0].len();
    for p in x.iter().chain(y) {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
    }
    let mut data = Vec::with_capacity(x.len() * y.len());
    for xi in x {
        for yj in y {
            data.push(order.cost_from_sq(sq_dist(xi, yj)));
        }
    }
    Ok(CostMatrix {
        rows: x.len(),
        cols: y.len(),
        data,
        order: Some(order),
    })
}

/// `m` groups of raw points with optional contexts and ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    groups: Vec<Vec<Vec<f64>>>,
    contexts: Option<Vec<Vec<f64>>>,
    labels: Option<Vec<usize>>,
}

impl GroupedDataset {
    pub fn new(
        groups: Vec<Vec<Vec<f64>>>,
        contexts: Option<Vec<Vec<f64>>>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidParameter("dataset has no groups".into()));
        }
        let mut d = None;
        for g in &groups {
            if g.is_empty() {
                return Err(Error::EmptyPointSet);
            }
            for p in g {
                let expected = *d.get_or_insert(p.len());
                if p.len() != expected {
                    return Err(Error::DimensionMismatch {
                        expected,
                        got: p.len(),
                    });
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite data point".into()));
                }
            }
        }
        if d == Some(0) {
            return Err(Error::InvalidParameter("points must have dimension >= 1".into()));
        }
        if let Some(c) = &contexts {
            if c.len() != groups.len() {
                return Err(Error::LengthMismatch {
                    left: c.len(),
                    right: groups.len(),
                });
            }
            let d2 = c[0].len();
            if d2 == 0 {
                return Err(Error::InvalidParameter("contexts must have dimension >= 1".into()));
            }
            if let Some(bad) = c.iter().find(|v| v.len() != d2) {
                return Err(Error::DimensionMismatch {
                    expected: d2,
                    got: bad.len(),
                });
            }
        }
        if let Some(l) = &labels {
            if l.len() != groups.len() {
                return Err(Error::LengthMismatch {
                    left: l.len(),
                    right: groups.len(),
                });
            }
        }
        Ok(Self {
            groups,
            contexts,
            labels,
        })
    }

    pub fn groups(&self) -> &[Vec<Vec<f64>>] {
        &self.groups
    }

    pub fn contexts(&self) -> Option<&[Vec<f64>]> {
        self.contexts.as_deref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.groups[0][0].len()
    }

    pub fn total_points(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Empirical measure of every group.
    pub fn empirical_measures(&self) -> Vec<DiscreteMeasure> {
        self.groups
            .iter()
            .map(|g| make_empirical(g).expect("groups are nonempty by construction"))
            .collect()
    }

    pub fn pooled_points(&self) -> Vec<Vec<f64>> {
        self.groups.iter().flatten().cloned().collect()
    }

    /// Copy with the same contexts and labels but new points.
    pub fn with_groups(&self, groups: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::new(groups, self.contexts.clone(), self.labels.clone())
    }

    /// Copy with every context replaced, e.g. to neutralize the context term.
    pub fn with_contexts(&self, contexts: Option<Vec<Vec<f64>>>) -> Result<Self> {
        Self::new(self.groups.clone(), contexts, self.labels.clone())
    }
}
