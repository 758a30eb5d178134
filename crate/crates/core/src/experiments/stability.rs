use serde::{Deserialize, Serialize};

use crate::batch::sample_batch;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::oracle::{max_instance_gradient_norm, minibatch_gradient, FiniteSumProblem};
use crate::optim::{psgd_step, update_count, Penalty, ReturnMode};
use crate::problems::DiagonalQuadraticProblem;
use crate::rng::{Rng, RunStreams, Stream};
use crate::schedules::theorem2_bound;
use crate::stagewise::{Method, StageSchedule};

/// Relative slack absorbing floating-point roundoff in the per-step check.
const ROUNDOFF: f64 = 1e-9;

fn default_probe_size() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    /// Index of the instance that differs between the two datasets.
    pub i0: usize,
    /// Replacement for instance `i0`; `None` keeps the datasets identical.
    #[serde(default)]
    pub replacement: Option<Vec<f64>>,
    /// Gradient bound for the stability bound; measured along both
    /// trajectories when absent.
    #[serde(default)]
    pub grad_bound: Option<f64>,
    /// Shared seed for batch selection and returned-iterate choice.
    pub seed: u64,
    pub schedule: StageSchedule,
    #[serde(default = "default_probe_size")]
    pub probe_size: usize,
    #[serde(default)]
    pub probe_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityStep {
    pub stage: usize,
    pub iteration: usize,
    pub contains_i0: bool,
    /// `δ_m`.
    pub delta: f64,
    /// `δ_{m+1}`.
    pub delta_next: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub steps: Vec<StabilityStep>,
    /// Largest per-instance gradient norm seen along both trajectories.
    pub measured_grad_bound: f64,
    /// Position in `steps` of the first batch containing `i0`.
    pub first_contact: Option<usize>,
    pub zero_before_contact: bool,
    pub max_delta: f64,
    pub final_delta: f64,
    pub stability_bound: f64,
    /// Largest loss gap of the two outputs over the probe set.
    pub eps_stab_estimate: f64,
    /// Final iterates of the runs on the first and second dataset.
    pub outputs: [Vector; 2],
}

impl StabilityReport {
    pub fn all_hold(&self) -> bool {
        self.steps.iter().all(|s| s.holds)
    }

    pub fn fraction_holding(&self) -> f64 {
        if self.steps.is_empty() {
            return 1.0;
        }
        self.steps.iter().filter(|s| s.holds).count() as f64 / self.steps.len() as f64
    }
}

/// Right-hand side of the one-step distance recursion between coupled
/// penalty-SGD runs. `delta_1` is the distance between the stage anchors.
#[allow(clippy::too_many_arguments)]
pub fn one_step_bound(
    contains_i0: bool,
    delta_1: f64,
    delta_m: f64,
    eta: f64,
    penalty: Penalty,
    l: f64,
    batch: usize,
    grad_bound: f64,
) -> f64 {
    let pull = penalty.pull(eta) * delta_1;
    let shrink = penalty.shrink(eta);
    if contains_i0 {
        let b = batch as f64;
        pull + shrink * (b + (b - 1.0) * l * eta) / b * delta_m + 2.0 * shrink * eta * grad_bound / b
    } else {
        pull + shrink * (1.0 + l * eta) * delta_m
    }
}

/// Builds the neighbouring dataset from `cfg.replacement` and probes it.
pub fn stability_probe(
    problem: &DiagonalQuadraticProblem,
    w_1: &Vector,
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    match &cfg.replacement {
        Some(xi) => {
            let second = problem.with_instance(cfg.i0, xi)?;
            stability_probe_pair(problem, &second, w_1, cfg)
        }
        None => stability_probe_pair(problem, problem, w_1, cfg),
    }
}

fn check_pair(a: &DiagonalQuadraticProblem, b: &DiagonalQuadraticProblem, i0: usize) -> Result<()> {
    linalg::check_dim(a.num_instances(), b.num_instances())?;
    linalg::check_dim(a.dim(), b.dim())?;
    if i0 >= a.num_instances() {
        return Err(Error::IndexOutOfRange {
            index: i0,
            n: a.num_instances(),
        });
    }
    if a.diag() != b.diag() {
        return Err(Error::param("diag", "datasets must share the curvature"));
    }
    if (0..a.num_instances()).any(|i| i != i0 && a.instance(i) != b.instance(i)) {
        return Err(Error::param("i0", "datasets differ outside the chosen index"));
    }
    Ok(())
}

/// Runs penalty SGD on both datasets with shared batches and returned-iterate
/// choices, checking each step against the one-step recursion.
pub fn stability_probe_pair(
    first: &DiagonalQuadraticProblem,
    second: &DiagonalQuadraticProblem,
    w_1: &Vector,
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    check_pair(first, second, cfg.i0)?;
    linalg::check_dim(first.dim(), w_1.dim())?;
    let schedule = &cfg.schedule;
    schedule.validate()?;
    let penalty = match schedule.method {
        Method::Sgd { penalty } => penalty,
        other => {
            return Err(Error::ScheduleShape(format!(
                "stability probe needs an sgd schedule, got {other:?}"
            )))
        }
    };
    let constants = first.exact_constants();
    let n = first.num_instances();

    struct Pending {
        stage: usize,
        iteration: usize,
        contains_i0: bool,
        delta_1: f64,
        delta: f64,
        delta_next: f64,
        eta: f64,
        batch: usize,
    }
    let mut pending = Vec::new();
    let mut streams = RunStreams::new(cfg.seed);
    let (mut anchor_1, mut anchor_2) = (w_1.clone(), w_1.clone());
    let mut measured: f64 = 0.0;

    for (idx, spec) in schedule.stages.iter().enumerate() {
        let batch = spec.batch.min(n);
        let updates = update_count(spec.budget, batch)?;
        let u = streams.tau.uniform();
        let tau = match schedule.return_mode {
            ReturnMode::Sampled => (2 + (u * updates as f64) as usize).min(updates + 1),
            ReturnMode::Last => updates + 1,
        };
        let delta_1 = anchor_1.distance(&anchor_2);
        let (mut w1, mut w2) = (anchor_1.clone(), anchor_2.clone());
        let (mut out_1, mut out_2) = (None, None);
        for m in 1..=updates {
            let indices = sample_batch(&mut streams.batch, n, batch)?;
            measured = measured
                .max(max_instance_gradient_norm(first, &w1))
                .max(max_instance_gradient_norm(second, &w2));
            let g1 = minibatch_gradient(first, &w1, &indices)?;
            let g2 = minibatch_gradient(second, &w2, &indices)?;
            let delta = w1.distance(&w2);
            w1 = psgd_step(&w1, &g1, &anchor_1, spec.eta, penalty);
            w2 = psgd_step(&w2, &g2, &anchor_2, spec.eta, penalty);
            if !(w1.is_finite() && w2.is_finite()) {
                return Err(Error::NonFinite {
                    what: "iterate",
                    index: None,
                });
            }
            pending.push(Pending {
                stage: idx + 1,
                iteration: m,
                contains_i0: indices.contains(cfg.i0),
                delta_1,
                delta,
                delta_next: w1.distance(&w2),
                eta: spec.eta,
                batch,
            });
            if m + 1 == tau {
                out_1 = Some(w1.clone());
                out_2 = Some(w2.clone());
            }
        }
        anchor_1 = out_1.unwrap_or(w1);
        anchor_2 = out_2.unwrap_or(w2);
    }

    let steps: Vec<StabilityStep> = pending
        .iter()
        .map(|p| {
            let bound = one_step_bound(
                p.contains_i0,
                p.delta_1,
                p.delta,
                p.eta,
                penalty,
                constants.l,
                p.batch,
                measured,
            );
            StabilityStep {
                stage: p.stage,
                iteration: p.iteration,
                contains_i0: p.contains_i0,
                delta: p.delta,
                delta_next: p.delta_next,
                bound,
                holds: p.delta_next <= bound * (1.0 + ROUNDOFF),
            }
        })
        .collect();
    let first_contact = steps.iter().position(|s| s.contains_i0);
    let zero_before_contact = steps[..first_contact.unwrap_or(steps.len())]
        .iter()
        .all(|s| s.delta_next == 0.0);
    let max_delta = steps.iter().map(|s| s.delta_next).fold(0.0, f64::max);

    let last = schedule.stages.last().expect("validated schedule is non-empty");
    let expected_gap = theorem2_bound(
        last.budget as f64,
        n as f64,
        penalty,
        last.eta,
        cfg.grad_bound.unwrap_or(measured),
        constants.mu,
        constants.alpha,
        constants.l,
    );

    let mut probe_rng = Rng::new(cfg.probe_seed, Stream::Probe);
    let mut gap: f64 = 0.0;
    for _ in 0..cfg.probe_size {
        let xi = probe_rng.normal_vec(first.dim());
        gap = gap.max((first.loss_at(&anchor_1, &xi) - second.loss_at(&anchor_2, &xi)).abs());
    }

    Ok(StabilityReport {
        steps,
        measured_grad_bound: measured,
        first_contact,
        zero_before_contact,
        max_delta,
        final_delta: anchor_1.distance(&anchor_2),
        stability_bound: expected_gap,
        eps_stab_estimate: gap,
        outputs: [anchor_1, anchor_2],
    })
}
