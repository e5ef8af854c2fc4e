//! Job execution strategies for independent sweep cells.

use alloc::vec::Vec;

/// Runs independent jobs and returns their results in job order.
///
/// Implementations may run jobs concurrently; the output order never depends
/// on scheduling.
pub trait Executor: Sync {
    fn run<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn run<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..jobs).map(f).collect()
    }
}

impl<E: Executor + ?Sized> Executor for &E {
    fn run<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (**self).run(jobs, f)
    }
}
