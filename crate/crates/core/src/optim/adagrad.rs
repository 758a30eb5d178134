use serde::{Deserialize, Serialize};

use super::{check_eta, drive, warn, ReturnMode, StageOptions, StageOutput, UpdateRule};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::oracle::FiniteSumProblem;
use crate::rng::RunStreams;

fn default_nu() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaGradConfig {
    pub delta: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    pub eta: f64,
    pub batch: usize,
    pub budget: u64,
    #[serde(default)]
    pub return_mode: ReturnMode,
}

impl AdaGradConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::param("delta", "must be positive and finite"));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::param("nu", "must be positive and finite"));
        }
        check_eta(self.eta)?;
        super::update_count(self.budget, self.batch).map(|_| ())
    }
}

/// Dual-averaging state of anchored AdaGrad.
///
/// The next iterate minimises `wᵀz + ½(w − w̃)ᵀH(w − w̃)/η` where `z` is the
/// running gradient sum and `H = diag((δ² + Σ g²)^ν)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaGradState {
    pub anchor: Vector,
    pub z: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub h: Vec<f64>,
    pub delta: f64,
    pub nu: f64,
}

impl AdaGradState {
    pub fn new(anchor: Vector, delta: f64, nu: f64) -> Self {
        let d = anchor.dim();
        let h0 = (delta * delta).powf(nu);
        AdaGradState {
            anchor,
            z: vec![0.0; d],
            sum_sq: vec![0.0; d],
            h: vec![h0; d],
            delta,
            nu,
        }
    }

    /// Absorbs gradient `g` and returns the closed-form minimiser
    /// `w̃ − η z / h` (coordinatewise).
    pub fn update(&mut self, g: &[f64], eta: f64) -> Vector {
        let mut w = vec![0.0; g.len()];
        self.update_into(g, eta, &mut w);
        Vector::from_raw(w)
    }

    fn update_into(&mut self, g: &[f64], eta: f64, w: &mut [f64]) {
        let d2 = self.delta * self.delta;
        for j in 0..g.len() {
            self.z[j] += g[j];
            // sequential accumulation of Σ g²; same value as re-summing the prefix
            self.sum_sq[j] += g[j] * g[j];
            let base = d2 + self.sum_sq[j];
            self.h[j] = if self.nu == 1.0 { base } else { base.powf(self.nu) };
            w[j] = self.anchor[j] - eta * self.z[j] / self.h[j];
        }
    }
}

struct AnchoredAdaGrad {
    state: AdaGradState,
    eta: f64,
}

impl UpdateRule for AnchoredAdaGrad {
    fn apply(&mut self, w: &mut [f64], g: &[f64]) {
        self.state.update_into(g, self.eta, w);
    }
}

/// Anchored AdaGrad started at `w_tilde` with fresh accumulators.
pub fn run_adagrad<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    cfg: &AdaGradConfig,
    w_tilde: &Vector,
    streams: &mut RunStreams,
    opts: StageOptions,
) -> Result<StageOutput> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    if let Some(c) = problem.constants() {
        if let Some(sigma2) = c.sigma2.filter(|s| *s > 0.0) {
            let b = cfg.batch as f64;
            let ratio = cfg.delta * cfg.delta * b * b / (2.0 * sigma2 * cfg.budget as f64);
            if ratio < 1.0 {
                warn(
                    &mut warnings,
                    format!("stage {}: delta^2 b^2/(2 sigma^2 C) = {ratio} < 1", opts.stage),
                );
            }
        }
        if let Some(w_star) = &c.w_star {
            let need = cfg.delta * w_star.distance(w_tilde);
            if cfg.eta < need {
                warn(
                    &mut warnings,
                    format!("stage {}: eta {} below delta*|w~ - w*| = {need}", opts.stage, cfg.eta),
                );
            }
        }
    }
    linalg::check_dim(problem.dim(), w_tilde.dim())?;
    let mut rule = AnchoredAdaGrad {
        state: AdaGradState::new(w_tilde.clone(), cfg.delta, cfg.nu),
        eta: cfg.eta,
    };
    let mut out = drive(
        problem,
        w_tilde,
        cfg.batch,
        cfg.budget,
        cfg.return_mode,
        streams,
        opts,
        &mut rule,
    )?;
    out.warnings = warnings;
    Ok(out)
}
