//! Sequential or rayon-backed execution of independent work items.
//!
//! Results are always collected in input order, so the choice of execution
//! never changes an output bit. Without the `parallel` feature every mode
//! runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Execution {
    Sequential,
    /// Rayon pool with the given number of threads; `None` uses the global pool.
    Parallel(Option<usize>),
    #[default]
    Auto,
}

impl Execution {
    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel(Some(workers))
        }
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self.resolve() {
            Execution::Sequential => items.iter().map(f).collect(),
            other => parallel::map(other, items, f),
        }
    }

    /// Runs `f` on each mutable chunk of `data` together with its index.
    pub fn for_each_chunk<T, E, F>(self, data: &mut [T], chunk: usize, f: F) -> Result<(), E>
    where
        T: Send,
        E: Send,
        F: Fn(usize, &mut [T]) -> Result<(), E> + Sync + Send,
    {
        match self.resolve() {
            Execution::Sequential => data
                .chunks_mut(chunk)
                .enumerate()
                .try_for_each(|(i, c)| f(i, c)),
            other => parallel::for_each_chunk(other, data, chunk, f),
        }
    }

    fn resolve(self) -> Execution {
        if cfg!(feature = "parallel") {
            match self {
                Execution::Auto => Execution::Parallel(None),
                other => other,
            }
        } else {
            Execution::Sequential
        }
    }
}

#[cfg(feature = "parallel")]
mod parallel {
    use super::Execution;
    use rayon::prelude::*;

    fn install<R: Send>(mode: Execution, job: impl FnOnce() -> R + Send) -> R {
        match mode {
            Execution::Parallel(Some(threads)) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(job),
                Err(_) => job(),
            },
            _ => job(),
        }
    }

    pub(super) fn map<T, U, F>(mode: Execution, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        install(mode, || items.par_iter().map(f).collect())
    }

    pub(super) fn for_each_chunk<T, E, F>(mode: Execution, data: &mut [T], chunk: usize, f: F) -> Result<(), E>
    where
        T: Send,
        E: Send,
        F: Fn(usize, &mut [T]) -> Result<(), E> + Sync + Send,
    {
        install(mode, || {
            data.par_chunks_mut(chunk)
                .enumerate()
                .try_for_each(|(i, c)| f(i, c))
        })
    }
}

#[cfg(not(feature = "parallel"))]
mod parallel {
    use super::Execution;

    pub(super) fn map<T, U, F>(_: Execution, items: &[T], f: F) -> Vec<U>
    where
        F: Fn(&T) -> U,
    {
        items.iter().map(f).collect()
    }

    pub(super) fn for_each_chunk<T, E, F>(_: Execution, data: &mut [T], chunk: usize, f: F) -> Result<(), E>
    where
        F: Fn(usize, &mut [T]) -> Result<(), E>,
    {
        data.chunks_mut(chunk).enumerate().try_for_each(|(i, c)| f(i, c))
    }
}
