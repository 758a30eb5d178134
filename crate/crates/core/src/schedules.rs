//! Theory-driven stage schedules. Every formula is evaluated in floating
//! point on exact reals; integer batch sizes and budgets are produced once,
//! by [`TheoryOutputs::to_schedule`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{estimate_sigma2, FiniteSumProblem};
use crate::optim::Penalty;
use crate::stagewise::{BudgetRounding, Method, StageSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub alpha: f64,
    pub mu: f64,
    pub l: f64,
    pub sigma2: f64,
    pub rho: f64,
    /// Upper bound on the initial suboptimality.
    pub eps_1: f64,
    pub eps_target: f64,
    /// Overrides the stage count derived from `eps_1 / eps_target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be positive and finite, got {v}")))
    }
}

impl TheoryInputs {
    /// Inputs for `problem` started at `w_1`, running `stages` stages.
    ///
    /// `eps_1` is the exact initial gap and `sigma2` comes from the problem's
    /// constants or, failing that, the gradient variance at `w_1`.
    pub fn for_problem<P: FiniteSumProblem + ?Sized>(
        problem: &P,
        w_1: &Vector,
        rho: f64,
        stages: usize,
    ) -> Result<Self> {
        let c = problem
            .constants()
            .ok_or(Error::MissingConstants("alpha, mu, L"))?;
        let eps_1 = problem
            .suboptimality(w_1)
            .ok_or(Error::MissingConstants("f_star"))?;
        let sigma2 = match c.sigma2 {
            Some(s) => s,
            None => estimate_sigma2(problem, w_1)?,
        };
        let inputs = TheoryInputs {
            alpha: c.alpha,
            mu: c.mu,
            l: c.l,
            sigma2,
            rho,
            eps_1,
            eps_target: eps_1 / rho.powi(stages as i32),
            stages: Some(stages),
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha)?;
        positive("mu", self.mu)?;
        positive("L", self.l)?;
        positive("sigma2", self.sigma2)?;
        positive("eps_1", self.eps_1)?;
        positive("eps_target", self.eps_target)?;
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::param("rho", format!("must exceed 1, got {}", self.rho)));
        }
        if self.l < self.mu {
            return Err(Error::param("L", "must be at least mu"));
        }
        if self.eps_target >= self.eps_1 {
            return Err(Error::param("eps_target", "must be below eps_1"));
        }
        if self.stages == Some(0) {
            return Err(Error::param("stages", "must be at least 1"));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// `⌈log_ρ(ε_1/ε_target)⌉` unless overridden.
    pub fn stage_count(&self) -> usize {
        if let Some(s) = self.stages {
            return s;
        }
        let r = (self.eps_1 / self.eps_target).ln() / self.rho.ln();
        // ratios that are exact powers of ρ should not gain a stage from roundoff
        let k = r.round();
        let s = if (r - k).abs() < 1e-9 { k } else { r.ceil() };
        (s as usize).max(1)
    }

    /// `ε_1, ε_1/ρ, …, ε_1/ρ^S`.
    pub fn eps_ladder(&self) -> Vec<f64> {
        let s = self.stage_count();
        let mut eps = Vec::with_capacity(s + 1);
        let mut e = self.eps_1;
        for _ in 0..=s {
            eps.push(e);
            e /= self.rho;
        }
        eps
    }
}

/// A schedule on exact reals, with the constants its theorem prescribes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryOutputs {
    pub method: Method,
    pub rho: f64,
    pub theta: f64,
    /// `ε_1, …, ε_{S+1}`.
    pub eps: Vec<f64>,
    pub batches: Vec<f64>,
    pub budgets: Vec<f64>,
    /// Constant learning rate.
    pub eta: f64,
    /// Largest learning rate the analysis allows.
    pub eta_cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
}

impl TheoryOutputs {
    pub fn stages(&self) -> usize {
        self.batches.len()
    }

    /// Integer schedule with `b_s = round(ρ^{s−1} b_1)` and budgets rounded
    /// per `rounding`.
    pub fn to_schedule(&self, rounding: BudgetRounding) -> Result<StageSchedule> {
        let mut schedule = StageSchedule::enlarge(
            self.method,
            self.batches[0],
            self.eta,
            self.budgets[0],
            self.rho,
            self.stages(),
            rounding,
        )?;
        schedule.eps = self.eps.clone();
        schedule.theta = Some(self.theta);
        Ok(schedule)
    }
}

fn ladder(inputs: &TheoryInputs, theta: f64, batch_numerator: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let eps = inputs.eps_ladder();
    let stages = &eps[..eps.len() - 1];
    let batches = stages.iter().map(|e| batch_numerator / e).collect();
    let budgets = stages.iter().map(|e| theta / e).collect();
    (eps, batches, budgets)
}

/// SGD with growing batches: `θ = 32σ²ρ²/(α²μ)`, `η = α/(2L)`,
/// `b_s = ασ√(μθ)/(2√2 L ε_s)`, `C_s = θ/ε_s`, penalty `γ ≥ 4ρ/(αμ)`.
///
/// The method uses `γ` at its lower bound.
pub fn theorem1_schedule(inputs: &TheoryInputs) -> Result<TheoryOutputs> {
    inputs.validate()?;
    let TheoryInputs {
        alpha, mu, l, rho, ..
    } = *inputs;
    let sigma = inputs.sigma();
    let theta = 32.0 * inputs.sigma2 * rho * rho / (alpha * alpha * mu);
    let numerator = alpha * sigma * (mu * theta).sqrt() / (2.0 * 2f64.sqrt() * l);
    let (eps, batches, budgets) = ladder(inputs, theta, numerator);
    let gamma_min = 4.0 * rho / (alpha * mu);
    let eta = alpha / (2.0 * l);
    Ok(TheoryOutputs {
        method: Method::Sgd {
            penalty: Penalty::Gamma(gamma_min),
        },
        rho,
        theta,
        eps,
        batches,
        budgets,
        eta,
        eta_cap: eta,
        gamma_min: Some(gamma_min),
        delta_min: None,
    })
}

/// Learning rate that balances the one-stage SGD bound for `(b_s, ε_s)`:
/// `√2 b_s ε_s/(σ√(μθ))`.
pub fn balanced_sgd_eta(batch: f64, eps: f64, sigma: f64, mu: f64, theta: f64) -> f64 {
    2f64.sqrt() * batch * eps / (sigma * (mu * theta).sqrt())
}

/// Momentum SGD with growing batches: `θ = 8σ²ρ²/(α²μ(1−β))`,
/// `η = α(1−β)²/(2(1+β)L)`, `b_s = ασ√(μθ(1−β))/(2√2(1+β)Lε_s)`.
pub fn msebs_schedule(inputs: &TheoryInputs, beta: f64) -> Result<TheoryOutputs> {
    inputs.validate()?;
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::param("beta", format!("must lie in [0, 1), got {beta}")));
    }
    let TheoryInputs {
        alpha, mu, l, rho, ..
    } = *inputs;
    let sigma = inputs.sigma();
    let theta = 8.0 * inputs.sigma2 * rho * rho / (alpha * alpha * mu * (1.0 - beta));
    let numerator =
        alpha * sigma * (mu * theta * (1.0 - beta)).sqrt() / (2.0 * 2f64.sqrt() * (1.0 + beta) * l);
    let (eps, batches, budgets) = ladder(inputs, theta, numerator);
    let eta = alpha * (1.0 - beta) * (1.0 - beta) / (2.0 * (1.0 + beta) * l);
    Ok(TheoryOutputs {
        method: Method::Momentum { beta, reset: true },
        rho,
        theta,
        eps,
        batches,
        budgets,
        eta,
        eta_cap: eta,
        gamma_min: None,
        delta_min: None,
    })
}

/// Learning rate balancing the one-stage momentum bound:
/// `√2 b_s ε_s (1−β)^{3/2}/(σ√(μθ))`.
pub fn balanced_msgd_eta(batch: f64, eps: f64, sigma: f64, mu: f64, theta: f64, beta: f64) -> f64 {
    balanced_sgd_eta(batch, eps, sigma, mu, theta) * (1.0 - beta).powf(1.5)
}

/// Smallest admissible AdaGrad stabiliser, `8L√(2ε_1)/(α√μ)`.
pub fn adasebs_delta_min(inputs: &TheoryInputs) -> f64 {
    8.0 * inputs.l * (2.0 * inputs.eps_1).sqrt() / (inputs.alpha * inputs.mu.sqrt())
}

/// Anchored AdaGrad with growing batches: `θ = 64σ²ρ²/(α²μ)`,
/// `b_s = ασ√(μθ)/(8Lε_s)`, `η = αδ²/(8L)`.
pub fn adasebs_schedule(inputs: &TheoryInputs, delta: f64) -> Result<TheoryOutputs> {
    inputs.validate()?;
    positive("delta", delta)?;
    let required = adasebs_delta_min(inputs);
    if delta < required {
        return Err(Error::DeltaBelowBound { delta, required });
    }
    let TheoryInputs {
        alpha, mu, l, rho, ..
    } = *inputs;
    let sigma = inputs.sigma();
    let theta = 64.0 * inputs.sigma2 * rho * rho / (alpha * alpha * mu);
    let numerator = alpha * sigma * (mu * theta).sqrt() / (8.0 * l);
    let (eps, batches, budgets) = ladder(inputs, theta, numerator);
    let eta = alpha * delta * delta / (8.0 * l);
    Ok(TheoryOutputs {
        method: Method::AdaGrad { delta, nu: 1.0 },
        rho,
        theta,
        eps,
        batches,
        budgets,
        eta,
        eta_cap: eta,
        gamma_min: None,
        delta_min: Some(required),
    })
}

/// `δ²b²/(2σ²C)`, required to be at least 1 by the one-stage AdaGrad bound.
pub fn adagrad_batch_ratio(delta: f64, batch: f64, sigma2: f64, budget: f64) -> f64 {
    delta * delta * batch * batch / (2.0 * sigma2 * budget)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalPair {
    pub eta_star: f64,
    /// `η* ≤ α/(2L)`.
    pub feasible: bool,
    /// Lower bound `2·dist·σ/(α√C)` on the one-stage error at the optimum.
    pub psi_lower_bound: f64,
    /// Largest batch with a feasible learning rate, `ασ√C/(2L·dist)`.
    pub b_max: f64,
}

/// Learning rate minimising the one-stage SGD bound at batch size `b` and
/// budget `C`: `η* = dist·b/(σ√C)`.
pub fn optimal_pair_eq5(budget: f64, dist: f64, sigma: f64, alpha: f64, l: f64, batch: f64) -> OptimalPair {
    let root_c = budget.sqrt();
    let eta_star = dist * batch / (sigma * root_c);
    OptimalPair {
        eta_star,
        feasible: eta_star <= alpha / (2.0 * l),
        psi_lower_bound: 2.0 * dist * sigma / (alpha * root_c),
        b_max: alpha * sigma * root_c / (2.0 * l * dist),
    }
}

/// Uniform-stability bound for penalty SGD with budget `C` on `n` instances:
/// `C/n + ((1+1/q)/n)·(4γG²/((γ+η)μα))^{1/(1+q)}·C^{q/(q+1)}`, `q = 2L/(μα)`.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_bound(
    budget: f64,
    n: f64,
    penalty: Penalty,
    eta: f64,
    grad_bound: f64,
    mu: f64,
    alpha: f64,
    l: f64,
) -> f64 {
    let q = 2.0 * l / (mu * alpha);
    let core = 4.0 * penalty.shrink(eta) * grad_bound * grad_bound / (mu * alpha);
    budget / n + (1.0 + 1.0 / q) / n * core.powf(1.0 / (1.0 + q)) * budget.powf(q / (q + 1.0))
}
