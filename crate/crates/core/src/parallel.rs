//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs
//! on the rayon global pool; without it every call runs sequentially. Work
//! items are independent and results are collected in index order, so the
//! output never depends on the schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Column count above which per-column kernels switch to parallel execution
/// under [`Execution::Auto`].
pub const PARALLEL_COLUMN_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    Parallel,
    /// Parallel when the feature is enabled and the workload is large.
    #[default]
    Auto,
}

impl Execution {
    fn is_parallel(self, len: usize) -> bool {
        match self {
            Execution::Sequential => false,
            Execution::Parallel => cfg!(feature = "parallel"),
            Execution::Auto => cfg!(feature = "parallel") && len >= PARALLEL_COLUMN_THRESHOLD,
        }
    }
}

/// Evaluate `f(0..len)` and collect the results in index order.
pub fn map_indices<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if exec.is_parallel(len) {
        #[cfg(feature = "parallel")]
        {
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Like [`map_indices`] but with [`Execution::Parallel`] semantics for small
/// batches of expensive jobs (bench repeats, test instances).
pub fn map_jobs<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let exec = match exec {
        Execution::Auto => Execution::Parallel,
        other => other,
    };
    map_indices(len, exec, f)
}
