//! Replicate fan-out.
//!
//! Results always come back in index order and are reduced sequentially by
//! the caller, so parallel and sequential execution give bitwise-identical
//! outputs. Without the `parallel` feature, [`Execution::Parallel`] runs
//! sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Evaluates `f(0), …, f(count − 1)` and returns the results in order.
pub fn map_indices<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..count).map(f).collect(),
        Execution::Parallel => parallel_map(count, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Fallible variant; the first error in index order wins.
pub fn try_map_indices<T, E, F>(exec: Execution, count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indices(exec, count, f).into_iter().collect()
}

/// Whether parallel execution is compiled in.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
