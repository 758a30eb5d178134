//! Reproducible studies. Replicates fan out through [`crate::par`] and are
//! reduced in index order, so results do not depend on the thread count.

mod batch_search;
mod equivalence;
mod stability;
mod validation;

pub use batch_search::{
    default_batch_grid, default_etas, loglog_fit, optimal_batch_search, BatchOptimum,
    BatchSearchConfig, BatchSearchReport, GridPoint, LogLogFit,
};
pub use equivalence::{strategy_equivalence, EquivalenceConfig, EquivalencePoint, EquivalenceReport};
pub use stability::{
    one_step_bound, stability_probe, stability_probe_pair, StabilityConfig, StabilityReport,
    StabilityStep,
};
pub use validation::{
    stage_error_validation, StageCheck, ValidationConfig, ValidationMethod, ValidationReport,
};

use crate::error::Result;
use crate::linalg::Vector;
use crate::oracle::FiniteSumProblem;
use crate::par::{try_map_indices, Execution};
use crate::rng::{replicate_seed, RunStreams};
use crate::stagewise::{run_stagewise, RunReport, StageSchedule};
use crate::trace::TraceLevel;

/// Runs `schedule` once per replicate seed.
pub fn replicate_runs<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    schedule: &StageSchedule,
    w_1: &Vector,
    seeds: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<Vec<RunReport>> {
    try_map_indices(exec, seeds, |r| {
        let mut streams = RunStreams::new(replicate_seed(base_seed, r as u64));
        run_stagewise(problem, schedule, w_1, &mut streams, TraceLevel::Counts)
    })
}

/// Mean suboptimality after each stage across replicate reports.
pub(crate) fn mean_stage_suboptimality(reports: &[RunReport]) -> Vec<Option<f64>> {
    let stages = reports.first().map_or(0, |r| r.stages.len());
    (0..stages)
        .map(|s| {
            let mut sum = 0.0;
            for r in reports {
                sum += r.stages[s].suboptimality?;
            }
            Some(sum / reports.len() as f64)
        })
        .collect()
}
