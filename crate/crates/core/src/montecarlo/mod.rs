//! Monte Carlo oracle: path simulation, empirical CDFs, ladder dissection and
//! garbage-term sampling.
//!
//! Path `i` always draws from the ChaCha8 stream `i` of the configured seed, so
//! results are identical for every worker count.

mod dump;
mod ecdf;
mod garbage;
mod ladder;
mod path;

pub use dump::write_outcomes_csv;
pub use ecdf::{ks_distance, sup_distance, sup_distance_bounds, EmpiricalCdf};
pub use garbage::simulate_garbage;
pub use ladder::{ladder_dissection, ladder_paths, LadderBlock, LadderPath};
pub use path::{simulate, BasisModel, simulate_path, PairModel, PathOutcome, SimSummary, StopReason};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Maximum number of summands per path.
    pub step_cap: u64,
    pub workers: usize,
    /// Stop a path once the `T`-walk falls below this value. Used in the defective
    /// regime, where the chance of a later crossing is below a known bound.
    pub floor: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 0,
            step_cap: 1_000_000,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            floor: None,
        }
    }
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.step_cap == 0 || self.workers == 0 {
            return Err(domain("n_paths, step_cap and workers must be positive"));
        }
        Ok(())
    }
}

/// The random stream of path `index`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f(i, rng_i)` for `i < n` on `workers` threads, keeping index order.
pub(crate) fn run_indexed<T, F>(n: usize, seed: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    if workers <= 1 {
        return Ok((0..n as u64).map(|i| f(i, &mut path_rng(seed, i))).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| domain(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        use rayon::prelude::*;
        (0..n as u64).into_par_iter().map(|i| f(i, &mut path_rng(seed, i))).collect()
    }))
}
