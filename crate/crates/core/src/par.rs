//! Parallel execution helpers.
//!
//! Every resampling loop in the crate maps an index range through a pure
//! function and collects the results in index order, so the parallel and
//! sequential builds are interchangeable: replicate `i` always sees the
//! same seeded stream regardless of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `0..n` through `f`, in parallel when the `parallel` feature is
/// enabled. The output is ordered by index either way.
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Caps the worker pool used by [`indexed_map`]. A size of zero keeps the
/// default (one worker per logical CPU). No-op in sequential builds, and
/// once a pool exists later calls are ignored.
pub fn configure_workers(workers: usize) {
    #[cfg(feature = "parallel")]
    {
        if workers > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
    }
}
