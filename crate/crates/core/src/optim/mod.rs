//! One-stage solvers with a fixed batch size, learning rate and gradient
//! budget `C`. Each performs `M = ⌊C/b⌋` updates and returns either a
//! uniformly sampled iterate from `{w_2, …, w_{M+1}}` or the last one.

mod adagrad;
mod momentum;
mod psgd;

pub use adagrad::{run_adagrad, AdaGradConfig, AdaGradState};
pub use momentum::{run_msgd, MsgdConfig};
pub use psgd::{psgd_step, run_psgd, Penalty, PsgdConfig};

use serde::{Deserialize, Serialize};

use crate::batch::sample_batch;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::oracle::{minibatch_gradient_into, FiniteSumProblem};
use crate::rng::RunStreams;
use crate::trace::{IterateTrace, TraceLevel};

/// Which iterate a stage hands back.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnMode {
    /// `w_τ` with τ uniform in `{2, …, M+1}`.
    #[default]
    Sampled,
    /// `w_{M+1}`.
    Last,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageOptions {
    /// 1-based stage index, used to label trace records.
    pub stage: usize,
    pub trace: TraceLevel,
}

impl Default for StageOptions {
    fn default() -> Self {
        StageOptions {
            stage: 1,
            trace: TraceLevel::Counts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub w_tau: Vector,
    pub w_last: Vector,
    /// Index of the returned iterate, in `2..=M+1`.
    pub tau: usize,
    /// Number of updates `M`.
    pub updates: usize,
    pub trace: IterateTrace,
    /// Final momentum `u_{M+1}` for momentum runs.
    pub momentum: Option<Vector>,
    pub warnings: Vec<String>,
}

/// `⌊C/b⌋`, rejecting budgets that allow no update.
pub fn update_count(budget: u64, batch: usize) -> Result<usize> {
    if batch == 0 {
        return Err(Error::param("batch", "must be at least 1"));
    }
    let m = budget / batch as u64;
    if m == 0 {
        return Err(Error::ZeroUpdates { budget, batch });
    }
    Ok(m as usize)
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::param("eta", format!("must be positive and finite, got {eta}")))
    }
}

/// The per-iteration map `(w_m, g_m) ↦ w_{m+1}` of a solver.
pub(crate) trait UpdateRule {
    fn apply(&mut self, w: &mut [f64], g: &[f64]);
}

/// Shared stage loop: sample a batch, evaluate its gradient, update, keep `w_τ`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<P, R>(
    problem: &P,
    w_tilde: &Vector,
    batch: usize,
    budget: u64,
    return_mode: ReturnMode,
    streams: &mut RunStreams,
    opts: StageOptions,
    rule: &mut R,
) -> Result<StageOutput>
where
    P: FiniteSumProblem + ?Sized,
    R: UpdateRule,
{
    linalg::check_dim(problem.dim(), w_tilde.dim())?;
    let n = problem.num_instances();
    if batch == 0 || batch > n {
        return Err(Error::InvalidBatch { batch, n });
    }
    let m_total = update_count(budget, batch)?;

    // τ is fixed before the loop so only w_τ and the last iterate are kept.
    let u = streams.tau.uniform();
    let tau = match return_mode {
        ReturnMode::Sampled => (2 + (u * m_total as f64) as usize).min(m_total + 1),
        ReturnMode::Last => m_total + 1,
    };

    let mut trace = IterateTrace::new(opts.trace);
    let mut w = w_tilde.as_slice().to_vec();
    let mut g = vec![0.0; w.len()];
    let mut w_tau = None;
    for m in 1..=m_total {
        let indices = sample_batch(&mut streams.batch, n, batch)?;
        minibatch_gradient_into(problem, &w, indices.as_slice(), &mut g)?;
        trace.record(problem, opts.stage, m, batch, &w, &g);
        rule.apply(&mut w, &g);
        if !linalg::all_finite(&w) {
            return Err(Error::NonFinite {
                what: "iterate",
                index: None,
            });
        }
        if m + 1 == tau {
            w_tau = Some(w.clone());
        }
    }

    let w_last = Vector::from_raw(w);
    Ok(StageOutput {
        w_tau: w_tau.map(Vector::from_raw).unwrap_or_else(|| w_last.clone()),
        w_last,
        tau,
        updates: m_total,
        trace,
        momentum: None,
        warnings: Vec::new(),
    })
}

pub(crate) fn warn(warnings: &mut Vec<String>, message: String) {
    log::warn!("{message}");
    warnings.push(message);
}
