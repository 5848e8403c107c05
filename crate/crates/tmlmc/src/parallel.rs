//! Rayon-backed sweep execution.

use rayon::prelude::*;
use tmlmc_core::learner::SweepExecutor;
use tmlmc_core::Result;

/// Evaluates the cells of a sweep on the rayon pool. Results come back in
/// cell order, so tables match the serial executor bit for bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonSweep;

impl SweepExecutor for RayonSweep {
    fn sweep(&self, cells: usize, estimate: &(dyn Fn(usize) -> Result<(f64, u64)> + Sync)) -> Result<Vec<(f64, u64)>> {
        (0..cells).into_par_iter().map(estimate).collect()
    }
}
