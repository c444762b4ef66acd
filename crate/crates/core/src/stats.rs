//! Success-rate statistics of accelerated runs.
//!
//! For each tolerance the statistic reports how many iterations were needed
//! before the residual (or any other per-iteration error measure) first fell
//! below it, and which fraction of those iterations took the Anderson step.

use crate::globalization::IterationRecord;

pub const TOLERANCE_LADDER: [f64; 5] = [1e-3, 1e-6, 1e-9, 1e-12, 1e-15];

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub tol: f64,
    /// Iterations performed before the tolerance was met, or all iterations if
    /// it never was.
    pub iter: usize,
    pub accepted: usize,
    pub reached: bool,
}

impl LevelStats {
    /// Accepted steps over total steps; `None` when no step was taken.
    pub fn s_rate(&self) -> Option<f64> {
        (self.iter > 0).then(|| self.accepted as f64 / self.iter as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessStats {
    pub levels: Vec<LevelStats>,
}

/// Statistics with respect to the residual norm column.
pub fn success_stats(records: &[IterationRecord], ladder: &[f64]) -> SuccessStats {
    let values: Vec<f64> = records.iter().map(|r| r.f_norm).collect();
    success_stats_with(records, &values, ladder)
}

/// Statistics with respect to an arbitrary error measure, one value per record.
pub fn success_stats_with(
    records: &[IterationRecord],
    values: &[f64],
    ladder: &[f64],
) -> SuccessStats {
    assert_eq!(records.len(), values.len(), "one value per record");
    let levels = ladder
        .iter()
        .map(|&tol| match values.iter().position(|&v| v <= tol) {
            Some(idx) => {
                let before = &records[..idx];
                LevelStats {
                    tol,
                    iter: idx,
                    accepted: before.iter().filter(|r| r.accepted).count(),
                    reached: true,
                }
            }
            None => {
                let steps: Vec<&IterationRecord> =
                    records.iter().filter(|r| r.lambda.is_some()).collect();
                LevelStats {
                    tol,
                    iter: steps.len(),
                    accepted: steps.iter().filter(|r| r.accepted).count(),
                    reached: false,
                }
            }
        })
        .collect();
    SuccessStats { levels }
}
