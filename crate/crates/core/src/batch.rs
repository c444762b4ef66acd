//! Independent solves run side by side.
//!
//! A single solve is inherently sequential, so parallelism lives one level up:
//! batches of starts, parameter sweeps and randomized test campaigns. Without
//! the `parallel` feature every entry point runs on the calling thread.

use nalgebra::DVector;

use crate::error::Result;
use crate::fixed_point::FixedPointMap;
use crate::globalization::{run_lm_aa, RunResult, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to every job, keeping input order in the output.
pub fn map_jobs<T, R, F>(jobs: &[T], execution: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution.is_parallel() {
        use rayon::prelude::*;
        return jobs.par_iter().map(f).collect();
    }
    let _ = execution;
    jobs.iter().map(f).collect()
}

/// Solves the same map from several starting points.
pub fn solve_many<M: FixedPointMap>(
    map: &M,
    starts: &[DVector<f64>],
    cfg: &SolverConfig,
    execution: Execution,
) -> Vec<Result<RunResult>> {
    map_jobs(starts, execution, |x0| run_lm_aa(map, x0, cfg))
}
