//! Finite-sum problems with analytically known optima and constants.

mod quadratic;
mod ridge;

pub use quadratic::DiagonalQuadraticProblem;
pub use ridge::RidgeProblem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Constants entering the convergence theory.
///
/// `alpha` is the weak quasi-convexity constant, `mu` the PL constant and
/// `l` the per-instance smoothness constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub alpha: f64,
    pub mu: f64,
    pub l: f64,
    pub kappa: f64,
    pub w_star: Option<Vector>,
    pub f_star: Option<f64>,
    pub sigma2: Option<f64>,
}

impl ProblemConstants {
    pub fn new(alpha: f64, mu: f64, l: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", "must be positive"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::param("mu", "must be positive"));
        }
        if !(l >= mu && l.is_finite()) {
            return Err(Error::param("l", "must satisfy L >= mu"));
        }
        Ok(ProblemConstants {
            alpha,
            mu,
            l,
            kappa: l / mu,
            w_star: None,
            f_star: None,
            sigma2: None,
        })
    }
}
