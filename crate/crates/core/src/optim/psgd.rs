use serde::{Deserialize, Serialize};

use super::{check_eta, drive, warn, ReturnMode, StageOptions, StageOutput, UpdateRule};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::FiniteSumProblem;
use crate::rng::RunStreams;

/// Quadratic penalty `r(w) = ‖w − w̃‖² / (2γ)` anchoring iterates to the
/// stage start. `None` is γ = ∞, i.e. plain SGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    None,
    Gamma(f64),
}

impl Penalty {
    pub fn validate(self) -> Result<Self> {
        match self {
            Penalty::Gamma(g) if !(g > 0.0 && g.is_finite()) => {
                Err(Error::param("gamma", format!("must be positive and finite, got {g}")))
            }
            p => Ok(p),
        }
    }

    /// `γ/(γ+η)`, which is 1 without a penalty.
    pub fn shrink(self, eta: f64) -> f64 {
        match self {
            Penalty::None => 1.0,
            Penalty::Gamma(g) => g / (g + eta),
        }
    }

    /// `η/(γ+η)`, the weight pulled toward the anchor.
    pub fn pull(self, eta: f64) -> f64 {
        match self {
            Penalty::None => 0.0,
            Penalty::Gamma(g) => eta / (g + eta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsgdConfig {
    pub penalty: Penalty,
    pub eta: f64,
    pub batch: usize,
    pub budget: u64,
    #[serde(default)]
    pub return_mode: ReturnMode,
}

impl PsgdConfig {
    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        check_eta(self.eta)?;
        super::update_count(self.budget, self.batch).map(|_| ())
    }
}

/// Exact minimiser of `gᵀw + ‖w − w_m‖²/(2η) + ‖w − w̃‖²/(2γ)`:
/// `(γ(w_m − ηg) + ηw̃)/(γ + η)`, or `w_m − ηg` when γ = ∞.
pub fn psgd_step(w_m: &[f64], g: &[f64], anchor: &[f64], eta: f64, penalty: Penalty) -> Vector {
    let mut w = w_m.to_vec();
    step_in_place(&mut w, g, anchor, eta, penalty);
    Vector::from_raw(w)
}

fn step_in_place(w: &mut [f64], g: &[f64], anchor: &[f64], eta: f64, penalty: Penalty) {
    match penalty {
        Penalty::None => {
            for (w, g) in w.iter_mut().zip(g) {
                *w -= eta * g;
            }
        }
        Penalty::Gamma(gamma) => {
            let denom = gamma + eta;
            for ((w, g), a) in w.iter_mut().zip(g).zip(anchor) {
                *w = (gamma * (*w - eta * g) + eta * a) / denom;
            }
        }
    }
}

struct PenaltyStep<'a> {
    anchor: &'a [f64],
    eta: f64,
    penalty: Penalty,
}

impl UpdateRule for PenaltyStep<'_> {
    fn apply(&mut self, w: &mut [f64], g: &[f64]) {
        step_in_place(w, g, self.anchor, self.eta, self.penalty);
    }
}

/// Penalty SGD anchored at `w_tilde`.
pub fn run_psgd<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    cfg: &PsgdConfig,
    w_tilde: &Vector,
    streams: &mut RunStreams,
    opts: StageOptions,
) -> Result<StageOutput> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    if let Some(c) = problem.constants() {
        let cap = c.alpha / (2.0 * c.l);
        if cfg.eta > cap {
            warn(
                &mut warnings,
                format!("stage {}: eta {} exceeds alpha/(2L) = {cap}", opts.stage, cfg.eta),
            );
        }
    }
    let mut rule = PenaltyStep {
        anchor: w_tilde.as_slice(),
        eta: cfg.eta,
        penalty: cfg.penalty,
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
