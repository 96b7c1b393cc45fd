//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the closures run on the rayon pool; without it
//! they run in a plain loop. Results are always returned in index order, so
//! callers can reduce them in a fixed order and stay independent of the
//! number of threads.

/// How a batch of independent tasks is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Parallel on the global pool (or a dedicated pool of `workers`
    /// threads). Falls back to sequential without the `parallel` feature.
    #[default]
    Parallel,
    Workers(usize),
}

/// `(0..len).map(f).collect()` under the requested execution mode.
pub fn map_indexed<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Workers(workers) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
                Ok(pool) => pool.install(|| (0..len).into_par_iter().map(f).collect()),
                Err(_) => (0..len).map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::Workers(_) => (0..len).map(f).collect(),
    }
}
