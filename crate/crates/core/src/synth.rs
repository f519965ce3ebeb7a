//! Seeded generators for synthetic multilevel data.
//!
//! Every generator draws from counter-split ChaCha streams, one per purpose,
//! so the same parameters and seed always give the same dataset.
//! Cluster labels are zero-based; the global means sit at `5·i·1_d`.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, GroupedDataset};
use crate::runtime::{stream_id, stream_rng};

/// Spacing between consecutive global means.
pub const MEAN_SPACING: f64 = 5.0;
/// Retries allowed when a shared-atom draw leaves a cluster without atoms.
pub const MAX_RESAMPLES: usize = 1000;

const GLOBALS: u32 = 1;
const LABELS: u32 = 2;
const LOCALS: u32 = 3;
const POINTS: u32 = 4;
const SHARED: u32 = 5;
const CONTEXT: u32 = 6;
const NOISE: u32 = 7;

/// How the spread of local atoms depends on the global cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Unit variance everywhere.
    Constant,
    /// Variance `z + 1` for (zero-based) cluster `z`.
    ClusterProportional,
}

impl VarianceMode {
    fn variance(self, cluster: usize) -> f64 {
        match self {
            VarianceMode::Constant => 1.0,
            VarianceMode::ClusterProportional => (cluster + 1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Number of groups.
    pub m: usize,
    /// Points per group.
    pub n: usize,
    pub d: usize,
    /// Number of global clusters.
    pub clusters: usize,
    /// Atoms per global measure.
    pub global_atoms: usize,
    /// Atoms per local measure.
    pub local_atoms: usize,
    /// Size of the shared atom set.
    pub shared_atoms: usize,
    /// Context dimension.
    pub context_dim: usize,
    pub variance: VarianceMode,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            m: 50,
            n: 50,
            d: 10,
            clusters: 5,
            global_atoms: 6,
            local_atoms: 5,
            shared_atoms: 50,
            context_dim: 2,
            variance: VarianceMode::Constant,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("m", self.m),
            ("n", self.n),
            ("d", self.d),
            ("M", self.clusters),
            ("global atoms", self.global_atoms),
            ("local atoms", self.local_atoms),
            ("K", self.shared_atoms),
            ("context dim", self.context_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// The measures a dataset was sampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub locals: Vec<DiscreteMeasure>,
    pub globals: Vec<DiscreteMeasure>,
    /// Zero-based global cluster of every group.
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_atoms: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_centers: Option<Vec<Vec<f64>>>,
}

fn gaussian(rng: &mut ChaCha8Rng, mean: &[f64], sd: f64) -> Vec<f64> {
    mean.iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            m + sd * z
        })
        .collect()
}

/// Dirichlet(1, ..., 1) as normalized unit exponentials.
fn flat_dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Index drawn from a probability vector.
fn categorical(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn sample_from(rng: &mut ChaCha8Rng, g: &DiscreteMeasure) -> Vec<f64> {
    g.atoms()[categorical(rng, g.weights())].clone()
}

/// Global measures: `K_i` atoms around `5·i·1_d` with flat Dirichlet weights.
fn global_measures(p: &GenParams) -> Vec<DiscreteMeasure> {
    let mut rng = stream_rng(p.seed, stream_id(GLOBALS, 0));
    (0..p.clusters)
        .map(|i| {
            let mu = vec![MEAN_SPACING * i as f64; p.d];
            let atoms: Vec<Vec<f64>> = (0..p.global_atoms).map(|_| gaussian(&mut rng, &mu, 1.0)).collect();
            let w = flat_dirichlet(&mut rng, p.global_atoms);
            DiscreteMeasure::new(atoms, w).expect("Dirichlet weights lie on the simplex")
        })
        .collect()
}

/// `n` observations from `N(μ, σ² I)` with `μ ~ G`.
fn observations(rng: &mut ChaCha8Rng, g: &DiscreteMeasure, n: usize, sd: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mu = sample_from(rng, g);
            gaussian(rng, &mu, sd)
        })
        .collect()
}

/// Data without sharing constraints: every group draws its own atoms around
/// atoms of its global measure.
pub fn gen_nc(p: &GenParams) -> Result<(GroupedDataset, Truth)> {
    p.validate()?;
    let globals = global_measures(p);
    let mut label_rng = stream_rng(p.seed, stream_id(LABELS, 0));
    let labels: Vec<usize> = (0..p.m).map(|_| label_rng.random_range(0..p.clusters)).collect();
    let mut locals = Vec::with_capacity(p.m);
    let mut groups = Vec::with_capacity(p.m);
    for (j, &z) in labels.iter().enumerate() {
        let mut rng = stream_rng(p.seed, stream_id(LOCALS, j));
        let sd = p.variance.variance(z).sqrt();
        let atoms: Vec<Vec<f64>> = (0..p.local_atoms)
            .map(|_| {
                let tau = sample_from(&mut rng, &globals[z]);
                gaussian(&mut rng, &tau, sd)
            })
            .collect();
        let w = flat_dirichlet(&mut rng, p.local_atoms);
        let g = DiscreteMeasure::new(atoms, w)?;
        let mut prng = stream_rng(p.seed, stream_id(POINTS, j));
        groups.push(observations(&mut prng, &g, p.n, 1.0));
        locals.push(g);
    }
    let dataset = GroupedDataset::new(groups, None, Some(labels.clone()))?;
    Ok((
        dataset,
        Truth {
            locals,
            globals,
            labels,
            shared_atoms: None,
            context_centers: None,
        },
    ))
}

/// Data whose local measures all live on one shared set of `K` atoms; each
/// shared atom belongs to one global cluster.
pub fn gen_lc(p: &GenParams) -> Result<(GroupedDataset, Truth)> {
    p.validate()?;
    if p.shared_atoms < p.clusters {
        return Err(Error::InvalidParameter(format!(
            "K = {} cannot give each of {} clusters a shared atom",
            p.shared_atoms, p.clusters
        )));
    }
    let globals = global_measures(p);
    let mut rng = stream_rng(p.seed, stream_id(SHARED, 0));
    let mut owners = Vec::new();
    for attempt in 0..=MAX_RESAMPLES {
        if attempt == MAX_RESAMPLES {
            return Err(Error::InvalidParameter("could not give every cluster a shared atom".into()));
        }
        owners = (0..p.shared_atoms).map(|_| rng.random_range(0..p.clusters)).collect::<Vec<usize>>();
        if (0..p.clusters).all(|c| owners.contains(&c)) {
            break;
        }
    }
    let shared: Vec<Vec<f64>> = owners
        .iter()
        .map(|&z| {
            let tau = sample_from(&mut rng, &globals[z]);
            gaussian(&mut rng, &tau, p.variance.variance(z).sqrt())
        })
        .collect();

    let mut label_rng = stream_rng(p.seed, stream_id(LABELS, 0));
    let labels: Vec<usize> = (0..p.m).map(|_| label_rng.random_range(0..p.clusters)).collect();
    let mut locals = Vec::with_capacity(p.m);
    let mut groups = Vec::with_capacity(p.m);
    for (j, &z) in labels.iter().enumerate() {
        let mut rng = stream_rng(p.seed, stream_id(LOCALS, j));
        let owned: Vec<Vec<f64>> = owners.iter().zip(&shared).filter(|(o, _)| **o == z).map(|(_, a)| a.clone()).collect();
        let w = flat_dirichlet(&mut rng, owned.len());
        let g = DiscreteMeasure::new(owned, w)?;
        let mut prng = stream_rng(p.seed, stream_id(POINTS, j));
        groups.push(observations(&mut prng, &g, p.n, 1.0));
        locals.push(g);
    }
    let dataset = GroupedDataset::new(groups, None, Some(labels.clone()))?;
    Ok((
        dataset,
        Truth {
            locals,
            globals,
            labels,
            shared_atoms: Some(shared),
            context_centers: None,
        },
    ))
}

/// Parameters of the context generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextParams {
    pub m: usize,
    pub n: usize,
    /// Content dimension.
    pub d: usize,
    pub context_dim: usize,
    pub clusters: usize,
    /// Shared Gaussian components the cluster mixtures are built from.
    pub components: usize,
    /// Components per cluster mixture.
    pub mixture_size: usize,
    pub seed: u64,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self {
            m: 3000,
            n: 100,
            d: 2,
            context_dim: 2,
            clusters: 6,
            components: 6,
            mixture_size: 3,
            seed: 0,
        }
    }
}

/// Radius of the ring that holds the shared content components.
const COMPONENT_RADIUS: f64 = 10.0;

/// Grouped data with one context vector per group. Each cluster's content is
/// an equal mixture of `mixture_size` of the shared components (placed on a
/// ring in the first two coordinates); its context is `N(5·i·1, I)`.
pub fn gen_context(p: &ContextParams) -> Result<(GroupedDataset, Truth)> {
    if p.m == 0 || p.n == 0 || p.d == 0 || p.context_dim == 0 || p.clusters == 0 {
        return Err(Error::InvalidParameter("all counts must be at least 1".into()));
    }
    if p.mixture_size == 0 || p.mixture_size > p.components {
        return Err(Error::InvalidParameter(format!(
            "mixture size {} must lie in 1..={}",
            p.mixture_size, p.components
        )));
    }
    let components: Vec<Vec<f64>> = (0..p.components)
        .map(|c| {
            let angle = std::f64::consts::TAU * c as f64 / p.components as f64;
            let mut v = vec![0.0; p.d];
            v[0] = COMPONENT_RADIUS * angle.cos();
            if p.d > 1 {
                v[1] = COMPONENT_RADIUS * angle.sin();
            }
            v
        })
        .collect();
    // Distinct component subsets per cluster while enough subsets exist.
    let mut rng = stream_rng(p.seed, stream_id(GLOBALS, 0));
    let distinct_possible = binomial(p.components, p.mixture_size) >= p.clusters as u128;
    let mut subsets: Vec<Vec<usize>> = Vec::with_capacity(p.clusters);
    while subsets.len() < p.clusters {
        let mut s = sample(&mut rng, p.components, p.mixture_size).into_vec();
        s.sort_unstable();
        if !distinct_possible || !subsets.contains(&s) {
            subsets.push(s);
        }
    }
    let globals: Vec<DiscreteMeasure> = subsets
        .iter()
        .map(|s| DiscreteMeasure::uniform(s.iter().map(|&c| components[c].clone()).collect()))
        .collect::<Result<_>>()?;
    let centers: Vec<Vec<f64>> = (0..p.clusters).map(|i| vec![MEAN_SPACING * i as f64; p.context_dim]).collect();

    let mut label_rng = stream_rng(p.seed, stream_id(LABELS, 0));
    let labels: Vec<usize> = (0..p.m).map(|_| label_rng.random_range(0..p.clusters)).collect();
    let mut groups = Vec::with_capacity(p.m);
    let mut contexts = Vec::with_capacity(p.m);
    for (j, &z) in labels.iter().enumerate() {
        let mut prng = stream_rng(p.seed, stream_id(POINTS, j));
        groups.push(observations(&mut prng, &globals[z], p.n, 1.0));
        let mut crng = stream_rng(p.seed, stream_id(CONTEXT, j));
        contexts.push(gaussian(&mut crng, &centers[z], 1.0));
    }
    let dataset = GroupedDataset::new(groups, Some(contexts), Some(labels.clone()))?;
    Ok((
        dataset,
        Truth {
            locals: labels.iter().map(|&z| globals[z].clone()).collect(),
            globals,
            labels,
            shared_atoms: None,
            context_centers: Some(centers),
        },
    ))
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Appends `⌈fraction · N⌉` points from `N(pooled mean, 9·pooled variance)`
/// (per coordinate) to uniformly chosen groups. Existing points are kept.
pub fn add_noise(dataset: &GroupedDataset, fraction: f64, seed: u64) -> Result<GroupedDataset> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("noise fraction must lie in [0, 1), got {fraction}")));
    }
    let total = dataset.total_points();
    let count = (fraction * total as f64).ceil() as usize;
    if count == 0 {
        return Ok(dataset.clone());
    }
    let pooled = dataset.pooled_points();
    let d = dataset.dim();
    let mut mean = vec![0.0; d];
    for p in &pooled {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / total as f64;
        }
    }
    let mut var = vec![0.0; d];
    for p in &pooled {
        for ((v, x), m) in var.iter_mut().zip(p).zip(&mean) {
            *v += (x - m) * (x - m) / total as f64;
        }
    }
    let mut rng = stream_rng(seed, stream_id(NOISE, 0));
    let mut groups = dataset.groups().to_vec();
    for _ in 0..count {
        let j = rng.random_range(0..groups.len());
        let x: Vec<f64> = mean
            .iter()
            .zip(&var)
            .map(|(m, v)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + 3.0 * v.sqrt() * z
            })
            .collect();
        groups[j].push(x);
    }
    dataset.with_groups(groups)
}
