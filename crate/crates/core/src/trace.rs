use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::oracle::FiniteSumProblem;

/// How much a run records about its iterates. Tracing never touches the
/// random streams, so the level does not affect trajectories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    /// Update and gradient counters only.
    #[default]
    Counts,
    /// One record per update with the stage, iteration and batch size.
    Iterations,
    /// Per-update records plus loss, gradient norm and distance to `w*`.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub stage: usize,
    pub iteration: usize,
    pub batch_size: usize,
    pub loss: Option<f64>,
    pub grad_norm: Option<f64>,
    pub dist_to_opt: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterateTrace {
    pub level: TraceLevel,
    pub records: Vec<TraceRecord>,
    /// Parameter updates performed (iteration complexity).
    pub updates: u64,
    /// Per-instance gradient evaluations (computation complexity).
    pub gradient_evals: u64,
}

impl IterateTrace {
    pub fn new(level: TraceLevel) -> Self {
        IterateTrace {
            level,
            ..Default::default()
        }
    }

    /// Accounts for one update at iterate `w` with mini-batch gradient `g`.
    pub(crate) fn record<P: FiniteSumProblem + ?Sized>(
        &mut self,
        problem: &P,
        stage: usize,
        iteration: usize,
        batch_size: usize,
        w: &[f64],
        g: &[f64],
    ) {
        self.updates += 1;
        self.gradient_evals += batch_size as u64;
        match self.level {
            TraceLevel::Counts => {}
            TraceLevel::Iterations => self.records.push(TraceRecord {
                stage,
                iteration,
                batch_size,
                loss: None,
                grad_norm: None,
                dist_to_opt: None,
            }),
            TraceLevel::Full => {
                let dist_to_opt = problem
                    .constants()
                    .and_then(|c| c.w_star.as_ref())
                    .map(|w_star| w_star.distance(w));
                self.records.push(TraceRecord {
                    stage,
                    iteration,
                    batch_size,
                    loss: Some(problem.loss(w)),
                    grad_norm: Some(linalg::norm(g)),
                    dist_to_opt,
                })
            }
        }
    }

    /// Appends a later stage's trace.
    pub fn extend(&mut self, other: IterateTrace) {
        self.updates += other.updates;
        self.gradient_evals += other.gradient_evals;
        self.records.extend(other.records);
    }

    /// Σ batch size over the records; equals `gradient_evals` whenever
    /// records are kept.
    pub fn recorded_gradient_evals(&self) -> u64 {
        self.records.iter().map(|r| r.batch_size as u64).sum()
    }
}
