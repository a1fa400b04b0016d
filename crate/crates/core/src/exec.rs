//! Where independent work items run.
//!
//! Results always come back in item order, so any reduction over them is
//! independent of the worker count.

/// Execution strategy for realization and sweep batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// A dedicated pool of `workers` threads. Without the `parallel` feature
    /// this runs sequentially.
    Parallel { workers: usize },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel {
            workers: available_workers(),
        }
    }
}

impl Execution {
    /// `workers <= 1` maps to [`Execution::Sequential`].
    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { workers }
        }
    }

    pub fn workers(&self) -> usize {
        match *self {
            Execution::Sequential => 1,
            Execution::Parallel { workers } => workers.max(1),
        }
    }

    /// `f(0), f(1), …, f(n − 1)` collected in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Parallel { workers } => parallel_map(workers, n, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;

    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Hardware parallelism, 1 if unknown.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
