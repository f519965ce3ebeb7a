//! Deterministic data-parallel execution.
//!
//! `par_map` applies a pure task to indexed items and returns results in
//! input order, so reductions downstream always accumulate in index order.
//! With the `parallel` feature the work runs on a dedicated rayon pool;
//! without it (or with one worker) the map is a plain loop.
//!
//! Randomness is split by counter: every consumer derives its own ChaCha
//! stream from `(seed, stream id)`, so draws never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// RNG for one logical consumer; identical across worker counts.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids are `purpose << 32 | index`.
pub fn stream_id(purpose: u32, index: usize) -> u64 {
    ((purpose as u64) << 32) | (index as u64 & 0xffff_ffff)
}

pub fn available_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// A worker pool of fixed size.
pub struct Runtime {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime").field("workers", &self.workers).finish()
    }
}

impl Default for Runtime {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Runtime {
    pub fn sequential() -> Self {
        Self {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// Pool with `workers` threads; `0` means the hardware parallelism.
    /// Without the `parallel` feature every runtime is sequential.
    pub fn new(workers: usize) -> Result<Self> {
        let workers = if workers == 0 { available_workers() } else { workers };
        if workers == 1 {
            return Ok(Self::sequential());
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("mwclust-worker-{i}"))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
            Ok(Self {
                workers,
                pool: Some(pool),
            })
        }
        #[cfg(not(feature = "parallel"))]
        {
            log::debug!("built without the parallel feature; running {workers} requested workers sequentially");
            Ok(Self { workers })
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Maps `task` over `items`, returning results in input order. The first
    /// failing index (lowest, not earliest in time) aborts the batch.
    pub fn par_map<T, R, F>(&self, items: &[T], task: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> Result<R> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            let out: Vec<Result<R>> = pool.install(|| items.par_iter().enumerate().map(|(i, t)| task(i, t)).collect());
            return collect_ordered(out);
        }
        let mut out = Vec::with_capacity(items.len());
        for (i, t) in items.iter().enumerate() {
            out.push(task(i, t).map_err(|e| wrap(i, e))?);
        }
        Ok(out)
    }

    /// `par_map` over `0..n`.
    pub fn par_range<R, F>(&self, n: usize, task: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize) -> Result<R> + Sync + Send,
    {
        let idx: Vec<usize> = (0..n).collect();
        self.par_map(&idx, |_, &i| task(i))
    }
}

fn wrap(index: usize, e: Error) -> Error {
    match e {
        // Keep the innermost index when tasks nest.
        Error::Task { .. } => e,
        other => Error::Task {
            index,
            source: Box::new(other),
        },
    }
}

#[cfg(feature = "parallel")]
fn collect_ordered<R>(results: Vec<Result<R>>) -> Result<Vec<R>> {
    let mut out = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        out.push(r.map_err(|e| wrap(i, e))?);
    }
    Ok(out)
}
