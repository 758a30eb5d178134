use serde::{Deserialize, Serialize};

use super::{check_eta, drive, warn, ReturnMode, StageOptions, StageOutput, UpdateRule};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::oracle::FiniteSumProblem;
use crate::rng::RunStreams;

fn default_reset() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsgdConfig {
    pub beta: f64,
    pub eta: f64,
    pub batch: usize,
    pub budget: u64,
    /// Start the stage with `u_1 = 0`. When false, a carried-in momentum is
    /// used instead.
    #[serde(default = "default_reset")]
    pub reset_momentum: bool,
    #[serde(default)]
    pub return_mode: ReturnMode,
}

impl MsgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::param("beta", format!("must lie in [0, 1), got {}", self.beta)));
        }
        check_eta(self.eta)?;
        super::update_count(self.budget, self.batch).map(|_| ())
    }
}

struct HeavyBall {
    u: Vec<f64>,
    beta: f64,
    eta: f64,
}

impl UpdateRule for HeavyBall {
    fn apply(&mut self, w: &mut [f64], g: &[f64]) {
        for ((w, u), g) in w.iter_mut().zip(self.u.iter_mut()).zip(g) {
            *u = self.beta * *u - self.eta * g;
            *w += *u;
        }
    }
}

/// Polyak momentum SGD: `u_{m+1} = βu_m − ηg_m`, `w_{m+1} = w_m + u_{m+1}`.
///
/// `carried` is only used when `reset_momentum` is false.
pub fn run_msgd<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    cfg: &MsgdConfig,
    w_tilde: &Vector,
    carried: Option<&Vector>,
    streams: &mut RunStreams,
    opts: StageOptions,
) -> Result<StageOutput> {
    cfg.validate()?;
    let u = match (cfg.reset_momentum, carried) {
        (false, Some(u)) => {
            linalg::check_dim(w_tilde.dim(), u.dim())?;
            u.as_slice().to_vec()
        }
        _ => vec![0.0; w_tilde.dim()],
    };
    let mut warnings = Vec::new();
    if let Some(c) = problem.constants() {
        let b = cfg.beta;
        let cap = c.alpha * (1.0 - b) * (1.0 - b) / (2.0 * (1.0 + b) * c.l);
        if cfg.eta > cap {
            warn(
                &mut warnings,
                format!(
                    "stage {}: eta {} exceeds alpha(1-beta)^2/(2(1+beta)L) = {cap}",
                    opts.stage, cfg.eta
                ),
            );
        }
    }
    let mut rule = HeavyBall {
        u,
        beta: cfg.beta,
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
    out.momentum = Some(Vector::new(rule.u)?);
    out.warnings = warnings;
    Ok(out)
}
