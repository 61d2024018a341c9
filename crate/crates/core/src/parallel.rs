//! Data-parallel map over independent work items.
//!
//! Every batched workload in this crate (experiment runs, verification
//! campaigns, Monte-Carlo chunks) is a map over items that own their state
//! and RNG, so a single helper covers them all. With the `parallel` feature
//! (default) it fans out through rayon; without it, it degrades to a
//! sequential loop with identical results and ordering.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_iter().map(f).collect()
}
