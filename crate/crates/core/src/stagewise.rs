//! Multi-stage drivers. Each stage runs one of the single-stage solvers
//! anchored at the previous stage's output; the report tracks suboptimality
//! per stage along with gradient and update counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::oracle::FiniteSumProblem;
use crate::optim::{
    self, run_adagrad, run_msgd, run_psgd, AdaGradConfig, MsgdConfig, Penalty, PsgdConfig,
    ReturnMode, StageOptions, StageOutput,
};
use crate::rng::RunStreams;
use crate::trace::{IterateTrace, TraceLevel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub batch: usize,
    pub eta: f64,
    pub budget: u64,
}

impl StageSpec {
    pub fn updates(&self) -> u64 {
        self.budget / self.batch as u64
    }
}

/// Inner solver and its method-level constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Sgd { penalty: Penalty },
    Momentum { beta: f64, reset: bool },
    AdaGrad { delta: f64, nu: f64 },
}

impl Method {
    pub fn vanilla() -> Self {
        Method::Sgd {
            penalty: Penalty::None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Method::Sgd { penalty } => penalty.validate().map(|_| ()),
            Method::Momentum { beta, .. } if !(0.0..1.0).contains(&beta) => {
                Err(Error::param("beta", format!("must lie in [0, 1), got {beta}")))
            }
            Method::AdaGrad { delta, .. } if !(delta > 0.0 && delta.is_finite()) => {
                Err(Error::param("delta", "must be positive and finite"))
            }
            Method::AdaGrad { nu, .. } if !(nu > 0.0 && nu.is_finite()) => {
                Err(Error::param("nu", "must be positive and finite"))
            }
            _ => Ok(()),
        }
    }
}

/// How stage parameters evolve, used to check a schedule matches its driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleShape {
    /// Constant learning rate, batch size growing by ρ.
    Enlarge,
    /// Constant batch size, learning rate shrinking by ρ.
    Decay,
    /// No shape constraint.
    Free,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRounding {
    /// `C_s` is a multiple of `b_s`, so the whole budget is spent.
    #[default]
    MultipleOfBatch,
    /// `C_s = ⌊ρ^{s−1} C_1⌋`.
    Floor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub stages: Vec<StageSpec>,
    pub method: Method,
    pub rho: f64,
    pub shape: ScheduleShape,
    #[serde(default)]
    pub return_mode: ReturnMode,
    /// Per-stage suboptimality targets, when the schedule came from theory.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Stage boundaries given in epochs over a dataset of `n` instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub n: usize,
    pub epochs: usize,
    /// Epochs at which a new stage begins, strictly increasing, inside `(0, epochs)`.
    pub boundaries: Vec<usize>,
    pub batch: usize,
    pub eta: f64,
    pub rho: f64,
    pub shape: ScheduleShape,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho >= 1.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::param("rho", format!("must be at least 1, got {rho}")))
    }
}

fn round_batch(x: f64) -> usize {
    (x.round() as usize).max(1)
}

impl StageSchedule {
    /// Constant `eta`, `b_s = round(ρ^{s−1} b_1)` and budgets growing by ρ.
    pub fn enlarge(
        method: Method,
        batch_1: f64,
        eta: f64,
        budget_1: f64,
        rho: f64,
        stages: usize,
        rounding: BudgetRounding,
    ) -> Result<Self> {
        check_rho(rho)?;
        if !(batch_1 > 0.0 && batch_1.is_finite()) {
            return Err(Error::param("batch", "first-stage batch must be positive"));
        }
        if !(budget_1 > 0.0 && budget_1.is_finite()) {
            return Err(Error::param("budget", "first-stage budget must be positive"));
        }
        let specs = (0..stages)
            .map(|s| {
                let scale = rho.powi(s as i32);
                let batch = round_batch(scale * batch_1);
                let budget = match rounding {
                    BudgetRounding::MultipleOfBatch => {
                        batch as u64 * ((scale * budget_1 / batch as f64).round() as u64).max(1)
                    }
                    BudgetRounding::Floor => (scale * budget_1).floor() as u64,
                };
                StageSpec { batch, eta, budget }
            })
            .collect();
        let schedule = StageSchedule {
            stages: specs,
            method,
            rho,
            shape: ScheduleShape::Enlarge,
            return_mode: ReturnMode::Sampled,
            eps: Vec::new(),
            theta: None,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Constant batch, `η_s = η_1/ρ^{s−1}`, explicit per-stage budgets.
    pub fn decay(method: Method, batch: usize, eta_1: f64, rho: f64, budgets: &[u64]) -> Result<Self> {
        check_rho(rho)?;
        let specs = budgets
            .iter()
            .enumerate()
            .map(|(s, &budget)| StageSpec {
                batch,
                eta: eta_1 / rho.powi(s as i32),
                budget,
            })
            .collect();
        let schedule = StageSchedule {
            stages: specs,
            method,
            rho,
            shape: ScheduleShape::Decay,
            return_mode: ReturnMode::Sampled,
            eps: Vec::new(),
            theta: None,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Stages delimited by epoch boundaries; stage `s` gets `epochs_s · n` gradients.
    pub fn from_epochs(method: Method, plan: &EpochPlan) -> Result<Self> {
        check_rho(plan.rho)?;
        let mut edges = vec![0];
        edges.extend(plan.boundaries.iter().copied());
        edges.push(plan.epochs);
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "boundaries",
                "must be strictly increasing and inside (0, epochs)",
            ));
        }
        let specs = edges
            .windows(2)
            .enumerate()
            .map(|(s, w)| {
                let scale = plan.rho.powi(s as i32);
                let budget = ((w[1] - w[0]) * plan.n) as u64;
                match plan.shape {
                    ScheduleShape::Decay => StageSpec {
                        batch: plan.batch,
                        eta: plan.eta / scale,
                        budget,
                    },
                    _ => StageSpec {
                        batch: round_batch(scale * plan.batch as f64),
                        eta: plan.eta,
                        budget,
                    },
                }
            })
            .collect();
        let schedule = StageSchedule {
            stages: specs,
            method,
            rho: plan.rho,
            shape: plan.shape,
            return_mode: ReturnMode::Sampled,
            eps: Vec::new(),
            theta: None,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn with_return_mode(mut self, mode: ReturnMode) -> Self {
        self.return_mode = mode;
        self
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::param("stages", "schedule has no stages"));
        }
        check_rho(self.rho)?;
        self.method.validate()?;
        for spec in &self.stages {
            optim::check_eta(spec.eta)?;
            optim::update_count(spec.budget, spec.batch)?;
        }
        if !self.eps.is_empty() && self.eps.len() != self.stages.len() + 1 {
            return Err(Error::param("eps", "ladder must have one entry per stage plus one"));
        }
        Ok(())
    }

    /// Checks the stage list against `shape`.
    pub fn check_shape(&self) -> Result<()> {
        let rho = self.rho;
        for (s, pair) in self.stages.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let ok = match self.shape {
                ScheduleShape::Enlarge => {
                    a.eta == b.eta
                        && b.batch >= a.batch
                        && (b.batch as f64 - rho * a.batch as f64).abs() <= 1.0 + rho
                }
                ScheduleShape::Decay => {
                    a.batch == b.batch && ((a.eta / rho - b.eta) / b.eta).abs() <= 1e-12
                }
                ScheduleShape::Free => true,
            };
            if !ok {
                return Err(Error::ScheduleShape(format!(
                    "stages {} and {} do not follow the {:?} shape with rho = {rho}",
                    s + 1,
                    s + 2,
                    self.shape
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    /// Σ C_s.
    pub total_gradients: u64,
    /// Σ ⌊C_s/b_s⌋.
    pub total_updates: u64,
}

/// Gradient and update counts implied by a schedule, without running it.
pub fn complexity_report(schedule: &StageSchedule) -> Complexity {
    schedule.stages.iter().fold(
        Complexity {
            total_gradients: 0,
            total_updates: 0,
        },
        |acc, s| Complexity {
            total_gradients: acc.total_gradients + s.budget,
            total_updates: acc.total_updates + s.updates(),
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub batch: usize,
    pub eta: f64,
    pub budget: u64,
    pub updates: usize,
    pub tau: usize,
    /// `F(w̃_{s+1}) − F*` when the optimum is known.
    pub suboptimality: Option<f64>,
    /// Suboptimality target for this stage's output, if the schedule has one.
    pub target: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub stages: Vec<StageRecord>,
    pub initial_suboptimality: Option<f64>,
    /// Σ C_s.
    pub total_gradients: u64,
    /// Σ M_s.
    pub total_updates: u64,
    /// Per-instance gradients actually evaluated, Σ M_s b_s.
    pub gradient_evals: u64,
    /// Stage anchors `w̃_1, …, w̃_{S+1}`.
    pub anchors: Vec<Vector>,
    pub warnings: Vec<String>,
    pub trace: IterateTrace,
}

impl RunReport {
    pub fn final_iterate(&self) -> &Vector {
        self.anchors.last().expect("report holds at least the start point")
    }
}

/// Runs every stage of `schedule` from `w_1`, anchoring stage `s+1` at the
/// iterate returned by stage `s`.
pub fn run_stagewise<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    schedule: &StageSchedule,
    w_1: &Vector,
    streams: &mut RunStreams,
    trace_level: TraceLevel,
) -> Result<RunReport> {
    schedule.validate()?;
    linalg::check_dim(problem.dim(), w_1.dim())?;
    let n = problem.num_instances();

    let mut report = RunReport {
        stages: Vec::with_capacity(schedule.len()),
        initial_suboptimality: problem.suboptimality(w_1),
        total_gradients: 0,
        total_updates: 0,
        gradient_evals: 0,
        anchors: vec![w_1.clone()],
        warnings: Vec::new(),
        trace: IterateTrace::new(trace_level),
    };
    let mut momentum: Option<Vector> = None;

    for (idx, spec) in schedule.stages.iter().enumerate() {
        let stage = idx + 1;
        let mut batch = spec.batch;
        if batch > n {
            let msg = format!("stage {stage}: batch {batch} exceeds n = {n}, clamped to full batch");
            log::warn!("{msg}");
            report.warnings.push(msg);
            batch = n;
        }
        let opts = StageOptions {
            stage,
            trace: trace_level,
        };
        let anchor = report.anchors.last().expect("anchors start non-empty");
        let out: StageOutput = match schedule.method {
            Method::Sgd { penalty } => run_psgd(
                problem,
                &PsgdConfig {
                    penalty,
                    eta: spec.eta,
                    batch,
                    budget: spec.budget,
                    return_mode: schedule.return_mode,
                },
                anchor,
                streams,
                opts,
            )?,
            Method::Momentum { beta, reset } => run_msgd(
                problem,
                &MsgdConfig {
                    beta,
                    eta: spec.eta,
                    batch,
                    budget: spec.budget,
                    reset_momentum: reset,
                    return_mode: schedule.return_mode,
                },
                anchor,
                momentum.as_ref(),
                streams,
                opts,
            )?,
            Method::AdaGrad { delta, nu } => run_adagrad(
                problem,
                &AdaGradConfig {
                    delta,
                    nu,
                    eta: spec.eta,
                    batch,
                    budget: spec.budget,
                    return_mode: schedule.return_mode,
                },
                anchor,
                streams,
                opts,
            )?,
        };

        report.stages.push(StageRecord {
            stage,
            batch,
            eta: spec.eta,
            budget: spec.budget,
            updates: out.updates,
            tau: out.tau,
            suboptimality: problem.suboptimality(&out.w_tau),
            target: schedule.eps.get(stage).copied(),
        });
        report.total_gradients += spec.budget;
        report.total_updates += out.updates as u64;
        report.gradient_evals += (out.updates * batch) as u64;
        report.warnings.extend(out.warnings);
        report.trace.extend(out.trace);
        momentum = out.momentum;
        report.anchors.push(out.w_tau);
    }
    Ok(report)
}

fn expect_method(schedule: &StageSchedule, ok: bool, want: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ScheduleShape(format!(
            "expected a {want} schedule, got {:?}",
            schedule.method
        )))
    }
}

/// Stagewise penalty SGD with growing batches.
pub fn run_sebs<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    schedule: &StageSchedule,
    w_1: &Vector,
    streams: &mut RunStreams,
    trace_level: TraceLevel,
) -> Result<RunReport> {
    expect_method(schedule, matches!(schedule.method, Method::Sgd { .. }), "sgd")?;
    expect_shape(schedule, ScheduleShape::Enlarge)?;
    run_stagewise(problem, schedule, w_1, streams, trace_level)
}

/// Stagewise momentum SGD with growing batches.
pub fn run_msebs<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    schedule: &StageSchedule,
    w_1: &Vector,
    streams: &mut RunStreams,
    trace_level: TraceLevel,
) -> Result<RunReport> {
    expect_method(schedule, matches!(schedule.method, Method::Momentum { .. }), "momentum")?;
    expect_shape(schedule, ScheduleShape::Enlarge)?;
    run_stagewise(problem, schedule, w_1, streams, trace_level)
}

/// Stagewise anchored AdaGrad with growing batches; accumulators restart each stage.
pub fn run_adasebs<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    schedule: &StageSchedule,
    w_1: &Vector,
    streams: &mut RunStreams,
    trace_level: TraceLevel,
) -> Result<RunReport> {
    expect_method(schedule, matches!(schedule.method, Method::AdaGrad { .. }), "adagrad")?;
    expect_shape(schedule, ScheduleShape::Enlarge)?;
    run_stagewise(problem, schedule, w_1, streams, trace_level)
}

/// Constant batch with a geometrically decaying learning rate.
pub fn run_classical_stagewise<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    schedule: &StageSchedule,
    w_1: &Vector,
    streams: &mut RunStreams,
    trace_level: TraceLevel,
) -> Result<RunReport> {
    expect_method(schedule, matches!(schedule.method, Method::Sgd { .. }), "sgd")?;
    expect_shape(schedule, ScheduleShape::Decay)?;
    run_stagewise(problem, schedule, w_1, streams, trace_level)
}

fn expect_shape(schedule: &StageSchedule, shape: ScheduleShape) -> Result<()> {
    if schedule.shape != shape {
        return Err(Error::ScheduleShape(format!(
            "expected a {shape:?} schedule, got {:?}",
            schedule.shape
        )));
    }
    schedule.check_shape()
}
