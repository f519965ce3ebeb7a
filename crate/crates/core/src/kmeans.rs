//! Euclidean K-means: D² seeding, Lloyd sweeps with deterministic tie and
//! empty-cluster handling, and the three-stage grouped baseline.

use rand::Rng;

use crate::error::{Error, Result};
use crate::measure::{sq_dist, DiscreteMeasure, GroupedDataset};
use crate::multilevel::{MultilevelState, Variant};
use crate::runtime::{stream_id, stream_rng, Runtime};

/// Stream purposes for the three-stage baseline.
const STAGE1: u32 = 0x5301;
const STAGE2: u32 = 0x5302;
const STAGE3: u32 = 0x5303;

#[derive(Debug, Clone, PartialEq)]
pub enum KMeansInit {
    /// D² sampling driven by the given seed.
    PlusPlus { seed: u64 },
    Given(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// `Σ w_i d²(Y_i, S) / Σ w_i` at the returned centers.
    pub objective: f64,
    /// Objective after seeding and after every sweep.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    /// Centers with their label frequencies as a discrete measure. Clusters
    /// are never empty after Lloyd's repair step.
    pub fn to_measure(&self, weights: Option<&[f64]>) -> Result<DiscreteMeasure> {
        let mut mass = vec![0.0; self.centers.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            mass[l] += weights.map_or(1.0, |w| w[i]);
        }
        let keep: Vec<usize> = (0..mass.len()).filter(|&c| mass[c] > 0.0).collect();
        DiscreteMeasure::from_masses(
            keep.iter().map(|&c| self.centers[c].clone()).collect(),
            keep.iter().map(|&c| mass[c]).collect(),
        )
    }
}

/// Number of distinct points under exact coordinate equality.
pub fn distinct_count(points: &[Vec<f64>]) -> usize {
    let mut seen = std::collections::HashSet::new();
    for p in points {
        seen.insert(p.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect::<Vec<u64>>());
    }
    seen.len()
}

fn validate(points: &[Vec<f64>], weights: &[f64], k: usize) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if weights.len() != points.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: points.len(),
        });
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidWeights("k-means weights must be positive".into()));
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.len() });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::TooManyClusters { k, distinct });
    }
    Ok(())
}

/// D² seeding over weighted points.
pub fn kmeans_pp_init_weighted(points: &[Vec<f64>], weights: &[f64], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    validate(points, weights, k)?;
    let mut rng = stream_rng(seed, 0);
    let pick = |rng: &mut rand_chacha::ChaCha8Rng, scores: &[f64]| -> usize {
        let total: f64 = scores.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut last_positive = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > 0.0 {
                last_positive = i;
                if target < *s {
                    return i;
                }
                target -= s;
            }
        }
        last_positive
    };
    let first = pick(&mut rng, weights);
    let mut centers = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        let c = pick(&mut rng, &scores);
        centers.push(points[c].clone());
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, &points[c]));
        }
    }
    Ok(centers)
}

pub fn kmeans_pp_init(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    kmeans_pp_init_weighted(points, &vec![1.0; points.len()], k, seed)
}

/// Index of the nearest center, lowest index on ties, with its squared distance.
pub fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, x) in centers.iter().enumerate() {
        let d = sq_dist(p, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn objective(points: &[Vec<f64>], weights: &[f64], centers: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let total: f64 = weights.iter().sum();
    let mut labels = Vec::with_capacity(points.len());
    let mut obj = 0.0;
    for (p, w) in points.iter().zip(weights) {
        let (c, d) = nearest(p, centers);
        labels.push(c);
        obj += w * d;
    }
    (labels, obj / total)
}

/// Lloyd's algorithm on weighted points.
pub fn lloyd_kmeans_weighted(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    init: &KMeansInit,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    validate(points, weights, k)?;
    let d = points[0].len();
    let mut centers = match init {
        KMeansInit::PlusPlus { seed } => kmeans_pp_init_weighted(points, weights, k, *seed)?,
        KMeansInit::Given(c) => {
            if c.len() != k {
                return Err(Error::LengthMismatch { left: c.len(), right: k });
            }
            if let Some(x) = c.iter().find(|x| x.len() != d) {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            c.clone()
        }
    };
    let (mut labels, mut obj) = objective(points, weights, &centers);
    let mut trace = vec![obj];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        repair_empty(points, &centers, &mut labels, k);
        // Recenter on the current labels.
        let mut sums = vec![vec![0.0; d]; k];
        let mut mass = vec![0.0; k];
        for ((p, w), &l) in points.iter().zip(weights).zip(&labels) {
            mass[l] += w;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += w * x;
            }
        }
        for c in 0..k {
            centers[c] = sums[c].iter().map(|s| s / mass[c]).collect();
        }
        let (new_labels, new_obj) = objective(points, weights, &centers);
        let unchanged = new_labels == labels;
        let rel = (obj - new_obj) / obj.max(f64::MIN_POSITIVE);
        labels = new_labels;
        obj = new_obj;
        trace.push(obj);
        if unchanged || rel < tol {
            break;
        }
    }
    Ok(KMeansResult {
        centers,
        labels,
        objective: obj,
        objective_trace: trace,
        iterations,
    })
}

/// Moves the point farthest from its own center into each empty cluster.
fn repair_empty(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = (0..k).find(|&c| counts[c] == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let dist = sq_dist(p, &centers[labels[i]]);
            if dist > far_d {
                far_d = dist;
                far = Some(i);
            }
        }
        match far {
            Some(i) => labels[i] = empty,
            None => return,
        }
    }
}

pub fn lloyd_kmeans(points: &[Vec<f64>], k: usize, init: &KMeansInit, max_iter: usize, tol: f64) -> Result<KMeansResult> {
    lloyd_kmeans_weighted(points, &vec![1.0; points.len()], k, init, max_iter, tol)
}

/// Default sweep cap and relative tolerance used by the library callers.
pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 0.0;

/// Three-stage K-means baseline: per-group quantizers, K-means on the
/// pooled atoms, then per-cluster K-means for the global measures. A group
/// takes the majority stage-two label of its atoms (lowest label on ties).
pub fn three_stage_kmeans(
    dataset: &GroupedDataset,
    k: usize,
    clusters: usize,
    support_cap: usize,
    seed: u64,
    runtime: &Runtime,
) -> Result<MultilevelState> {
    if clusters == 0 || support_cap == 0 {
        return Err(Error::InvalidParameter("M and L must be at least 1".into()));
    }
    let locals: Vec<DiscreteMeasure> = runtime.par_map(dataset.groups(), |j, g| {
        let kj = k.min(distinct_count(g));
        let res = lloyd_kmeans(g, kj, &KMeansInit::PlusPlus { seed: stage_seed(seed, STAGE1, j) }, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        res.to_measure(None)
    })?;

    let mut owner = Vec::new();
    let mut pooled = Vec::new();
    for (j, g) in locals.iter().enumerate() {
        for a in g.atoms() {
            owner.push(j);
            pooled.push(a.clone());
        }
    }
    let stage2 = lloyd_kmeans(&pooled, clusters, &KMeansInit::PlusPlus { seed: stage_seed(seed, STAGE2, 0) }, DEFAULT_MAX_ITER, DEFAULT_TOL)?;

    let globals: Vec<DiscreteMeasure> = runtime.par_range(clusters, |i| {
        let members: Vec<Vec<f64>> = pooled.iter().zip(&stage2.labels).filter(|(_, l)| **l == i).map(|(p, _)| p.clone()).collect();
        let li = support_cap.min(distinct_count(&members));
        let res = lloyd_kmeans(&members, li, &KMeansInit::PlusPlus { seed: stage_seed(seed, STAGE3, i) }, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        res.to_measure(None)
    })?;

    let mut votes = vec![vec![0usize; clusters]; locals.len()];
    for (&j, &l) in owner.iter().zip(&stage2.labels) {
        votes[j][l] += 1;
    }
    let assignments = votes
        .iter()
        .map(|v| {
            let mut best = 0;
            for (c, n) in v.iter().enumerate() {
                if *n > v[best] {
                    best = c;
                }
            }
            best
        })
        .collect();

    Ok(MultilevelState {
        variant: Variant::ThreeStage,
        locals,
        globals,
        shared_atoms: None,
        context_centroids: None,
        assignments,
        objective_trace: Vec::new(),
        lambda: 0.0,
        converged: true,
        warnings: Vec::new(),
    })
}

/// Derives a per-consumer seed; the stream split keeps serial and parallel
/// runs on identical draws.
pub(crate) fn stage_seed(seed: u64, purpose: u32, index: usize) -> u64 {
    use rand::RngCore;
    stream_rng(seed, stream_id(purpose, index)).next_u64()
}
