use serde::{Deserialize, Serialize};

use super::{mean_stage_suboptimality, replicate_runs};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::FiniteSumProblem;
use crate::optim::ReturnMode;
use crate::par::Execution;
use crate::schedules::{adasebs_schedule, msebs_schedule, theorem1_schedule, TheoryInputs, TheoryOutputs};
use crate::stagewise::{BudgetRounding, StageSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ValidationMethod {
    Sebs,
    Msebs {
        beta: f64,
    },
    /// `delta` defaults to its lower bound.
    AdaSebs {
        #[serde(default)]
        delta: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub method: ValidationMethod,
    pub seeds: usize,
    pub seed: u64,
    /// A stage passes when its mean suboptimality is at most `slack · ε`.
    #[serde(default = "one")]
    pub slack: f64,
    #[serde(default)]
    pub rounding: BudgetRounding,
    #[serde(default)]
    pub return_mode: ReturnMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageCheck {
    /// 0 is the starting point; stage `s` is the output of stage `s`.
    pub stage: usize,
    pub target: f64,
    pub mean_suboptimality: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub theory: TheoryOutputs,
    pub schedule: StageSchedule,
    pub checks: Vec<StageCheck>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Runs a method under its theorem's schedule across seeds and compares the
/// mean suboptimality after each stage with the ε ladder.
pub fn stage_error_validation<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    w_1: &Vector,
    inputs: &TheoryInputs,
    cfg: &ValidationConfig,
    exec: Execution,
) -> Result<ValidationReport> {
    if cfg.seeds == 0 {
        return Err(Error::param("seeds", "must be at least 1"));
    }
    if cfg.slack.is_nan() || cfg.slack <= 0.0 {
        return Err(Error::param("slack", "must be positive"));
    }
    let initial = problem
        .suboptimality(w_1)
        .ok_or(Error::MissingConstants("f_star"))?;
    let theory = match cfg.method {
        ValidationMethod::Sebs => theorem1_schedule(inputs)?,
        ValidationMethod::Msebs { beta } => msebs_schedule(inputs, beta)?,
        ValidationMethod::AdaSebs { delta } => {
            let delta = delta.unwrap_or_else(|| crate::schedules::adasebs_delta_min(inputs));
            adasebs_schedule(inputs, delta)?
        }
    };
    let schedule = theory.to_schedule(cfg.rounding)?.with_return_mode(cfg.return_mode);
    let reports = replicate_runs(problem, &schedule, w_1, cfg.seeds, cfg.seed, exec)?;
    let means = mean_stage_suboptimality(&reports);

    let mut checks = vec![StageCheck {
        stage: 0,
        target: theory.eps[0],
        mean_suboptimality: initial,
        pass: initial <= cfg.slack * theory.eps[0],
    }];
    for (s, mean) in means.into_iter().enumerate() {
        let mean = mean.ok_or(Error::MissingConstants("f_star"))?;
        let target = theory.eps[s + 1];
        checks.push(StageCheck {
            stage: s + 1,
            target,
            mean_suboptimality: mean,
            pass: mean <= cfg.slack * target,
        });
    }
    let mut warnings: Vec<String> = reports.first().map(|r| r.warnings.clone()).unwrap_or_default();
    warnings.dedup();
    Ok(ValidationReport {
        theory,
        schedule,
        checks,
        warnings,
    })
}
