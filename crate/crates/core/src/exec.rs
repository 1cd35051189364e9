//! Data-parallel execution with a sequential fallback.
//!
//! Every sweep in the crate is expressed as an indexed map over independent
//! work items. Results are always collected in index order, so the output of
//! [`Exec::Parallel`] and [`Exec::Sequential`] is identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run an indexed batch of independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Rayon work-stealing pool. Without the `parallel` feature this runs
    /// sequentially.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Evaluate `f(0), ..., f(n - 1)` and return the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Like [`Exec::map`] but each item yields a batch; batches are
    /// concatenated in index order.
    pub fn flat_map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> Vec<T> + Sync + Send,
    {
        self.map(n, f).into_iter().flatten().collect()
    }
}
