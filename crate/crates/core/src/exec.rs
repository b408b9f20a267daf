//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature and more than one worker, items run on a
//! dedicated rayon pool; otherwise they run sequentially on the caller's
//! thread. Output order is the item order either way, so reductions done
//! afterwards are bit-identical for any worker count.

/// Number of workers used when none is requested.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

pub fn map_indexed<R, F>(count: usize, workers: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers > 1 && count > 1 {
        use rayon::prelude::*;
        // a pool that fails to build falls through to the sequential path
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(|| (0..count).into_par_iter().map(&f).collect());
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    (0..count).map(f).collect()
}
