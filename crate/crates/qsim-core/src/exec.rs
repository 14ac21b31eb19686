//! Execution strategy for embarrassingly parallel sweeps and Monte Carlo loops.
//!
//! All hot loops in the crate go through [`map_range`]; the `parallel` feature
//! (on by default) backs it with rayon, and disabling the feature swaps in a
//! sequential loop with identical results. Benches compare the two paths.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run an independent-iteration loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Strategy {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Strategy::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Strategy::Sequential
    }
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_range<U, F>(strategy: Strategy, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match strategy {
        Strategy::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Strategy::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Caps the global worker count. Returns false if the pool was already built.
///
/// With the `parallel` feature off this is a no-op that reports success.
pub fn set_thread_cap(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        true
    }
}
