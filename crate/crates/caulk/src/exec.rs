//! Thread-pool executor for sweep cells.

use caulk_core::exec::Executor;
use rayon::prelude::*;

/// Environment variable that caps the worker count.
pub const THREADS_ENV: &str = "CAULK_THREADS";

/// Runs jobs on a dedicated rayon pool; results come back in job order.
pub struct PoolExecutor {
    pool: rayon::ThreadPool,
}

impl PoolExecutor {
    pub fn new(threads: usize) -> std::io::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(std::io::Error::other)?;
        Ok(Self { pool })
    }

    /// Worker count from `CAULK_THREADS`, or the available cores.
    pub fn from_env() -> std::io::Result<Self> {
        Self::new(threads_from_env())
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

impl Executor for PoolExecutor {
    fn run<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..jobs).into_par_iter().map(&f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use caulk_core::exec::Sequential;

    #[test]
    fn pool_matches_sequential_order() {
        let pool = PoolExecutor::new(4).unwrap();
        let f = |i: usize| caulk_core::seed::derive(7, i as u64);
        assert_eq!(pool.run(100, f), Sequential.run(100, f));
        assert_eq!(pool.threads(), 4);
    }
}
