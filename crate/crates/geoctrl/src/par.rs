//! Data-parallel map helpers.
//!
//! Batch drivers (growth sweeps, arc batches, verification sample loops) go
//! through [`map_collect`], which uses rayon when the `parallel` feature is
//! enabled and plain iteration otherwise. [`map_collect_serial`] is always
//! sequential; the bench suite compares the two.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential reference path, independent of the feature flag.
pub fn map_collect_serial<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Configure the global thread pool size. Call once, before parallel work.
/// No-op (and always Ok) without the `parallel` feature or with `jobs = 0`.
pub fn set_jobs(jobs: usize) -> std::result::Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        if jobs > 0 {
            return rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| e.to_string());
        }
    }
    let _ = jobs;
    Ok(())
}
