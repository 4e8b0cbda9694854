//! Parallel fan-out of independent trajectories with indexed reduction.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::seed::derive_seed;

/// Worker count from `PF_THREADS`, else the available cores.
pub fn thread_count() -> usize {
    std::env::var("PF_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `job(index, seed, rng)` for every index in `indices` on a pool sized
/// by `PF_THREADS`. Results come back in index order, so the output does not
/// depend on the worker count.
pub fn run_indexed<T, F>(master: u64, indices: Range<usize>, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .expect("thread pool");
    pool.install(|| {
        indices
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(master, i as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                job(i, seed, &mut rng)
            })
            .collect()
    })
}

/// Seeds assigned to the trajectories in `indices`.
pub fn seeds(master: u64, indices: Range<usize>) -> Vec<u64> {
    indices.map(|i| derive_seed(master, i as u64)).collect()
}
