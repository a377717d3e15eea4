//! Execution strategy for data-parallel workloads (Monte Carlo runs, study
//! grid points).
//!
//! With the `parallel` feature (default) work can run on the global rayon
//! pool; the sequential path is always available and is the only one
//! compiled when the feature is off. Results are assembled in index order
//! either way, so outputs are identical across executors.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executor {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Executor {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Executor::Rayon
        }
        #[cfg(not(feature = "parallel"))]
        {
            Executor::Sequential
        }
    }
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn run_indexed<T, F>(n: usize, executor: Executor, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match executor {
        Executor::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Executor::Rayon => (0..n).into_par_iter().map(f).collect(),
    }
}
