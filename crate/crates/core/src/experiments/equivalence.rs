use serde::{Deserialize, Serialize};

use super::{mean_stage_suboptimality, replicate_runs};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::FiniteSumProblem;
use crate::optim::{Penalty, ReturnMode};
use crate::par::Execution;
use crate::stagewise::{BudgetRounding, Method, StageSchedule};

fn no_penalty() -> Penalty {
    Penalty::None
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    pub batch_1: usize,
    pub eta_1: f64,
    pub rho: f64,
    pub stages: usize,
    pub budget_1: u64,
    pub seeds: usize,
    pub seed: u64,
    #[serde(default = "no_penalty")]
    pub penalty: Penalty,
    #[serde(default)]
    pub return_mode: ReturnMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalencePoint {
    pub stage: usize,
    pub cumulative_gradients: u64,
    /// Mean suboptimality with constant batch and decaying learning rate.
    pub mean_decay: f64,
    /// Mean suboptimality with constant learning rate and growing batch.
    pub mean_enlarge: f64,
    /// `max(a/b, b/a)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub decay: StageSchedule,
    pub enlarge: StageSchedule,
    pub initial_suboptimality: f64,
    pub points: Vec<EquivalencePoint>,
    pub max_ratio: f64,
}

/// Compares decaying the learning rate against enlarging the batch under
/// identical budgets, η/b ladders and replicate seeds.
pub fn strategy_equivalence<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    w_1: &Vector,
    cfg: &EquivalenceConfig,
    exec: Execution,
) -> Result<EquivalenceReport> {
    if cfg.seeds == 0 {
        return Err(Error::param("seeds", "must be at least 1"));
    }
    let method = Method::Sgd {
        penalty: cfg.penalty,
    };
    let enlarge = StageSchedule::enlarge(
        method,
        cfg.batch_1 as f64,
        cfg.eta_1,
        cfg.budget_1 as f64,
        cfg.rho,
        cfg.stages,
        BudgetRounding::MultipleOfBatch,
    )?
    .with_return_mode(cfg.return_mode);
    let budgets: Vec<u64> = enlarge.stages.iter().map(|s| s.budget).collect();
    let decay = StageSchedule::decay(method, cfg.batch_1, cfg.eta_1, cfg.rho, &budgets)?
        .with_return_mode(cfg.return_mode);

    let initial = problem
        .suboptimality(w_1)
        .ok_or(Error::MissingConstants("f_star"))?;
    let a = mean_stage_suboptimality(&replicate_runs(problem, &decay, w_1, cfg.seeds, cfg.seed, exec)?);
    let b = mean_stage_suboptimality(&replicate_runs(problem, &enlarge, w_1, cfg.seeds, cfg.seed, exec)?);

    let mut points = Vec::with_capacity(cfg.stages);
    let mut cumulative = 0;
    for s in 0..cfg.stages {
        cumulative += budgets[s];
        let (ma, mb) = match (a[s], b[s]) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(Error::MissingConstants("f_star")),
        };
        points.push(EquivalencePoint {
            stage: s + 1,
            cumulative_gradients: cumulative,
            mean_decay: ma,
            mean_enlarge: mb,
            ratio: (ma / mb).max(mb / ma),
        });
    }
    let max_ratio = points.iter().map(|p| p.ratio).fold(1.0, f64::max);
    Ok(EquivalenceReport {
        decay,
        enlarge,
        initial_suboptimality: initial,
        points,
        max_ratio,
    })
}
