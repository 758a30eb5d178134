use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::oracle::FiniteSumProblem;
use crate::problems::ProblemConstants;
use crate::rng::Rng;

/// Ridge-regularised least squares,
/// `f(w; (x_i, y_i)) = ½ (x_iᵀ w − y_i)² + (λ/2) ‖w‖²`.
///
/// The minimiser has the closed form `(XᵀX/n + λI)⁻¹ Xᵀy/n`. Gradient
/// variance depends on `w` here, so `sigma2` is left unset.
#[derive(Clone, Debug)]
pub struct RidgeProblem {
    n: usize,
    d: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    lambda: f64,
    constants: ProblemConstants,
}

impl RidgeProblem {
    /// Gaussian design with targets from a Gaussian ground truth plus noise.
    pub fn make_synthetic(n: usize, d: usize, lambda: f64, noise: f64, rng: &mut Rng) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::param("n", "problem must have n >= 1 and d >= 1"));
        }
        let features = rng.normal_vec(n * d);
        let truth = rng.normal_vec(d);
        let targets = features
            .chunks_exact(d)
            .map(|x| linalg::dot(x, &truth) + noise * rng.standard_normal())
            .collect();
        Self::from_parts(n, d, features, targets, lambda)
    }

    pub fn from_parts(n: usize, d: usize, features: Vec<f64>, targets: Vec<f64>, lambda: f64) -> Result<Self> {
        linalg::check_dim(n * d, features.len())?;
        linalg::check_dim(n, targets.len())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", "must be positive"));
        }
        if !linalg::all_finite(&features) || !linalg::all_finite(&targets) {
            return Err(Error::NonFinite {
                what: "instance data",
                index: None,
            });
        }

        let x = DMatrix::from_row_slice(n, d, &features);
        let y = DVector::from_column_slice(&targets);
        let hessian = x.transpose() * &x / n as f64 + DMatrix::identity(d, d) * lambda;
        let rhs = x.transpose() * &y / n as f64;
        let w_star = hessian
            .clone()
            .cholesky()
            .ok_or_else(|| Error::param("lambda", "regularised Hessian is not positive definite"))?
            .solve(&rhs);
        let eigen = hessian.symmetric_eigen();
        let mu = eigen.eigenvalues.min();
        let l = features
            .chunks_exact(d)
            .map(linalg::norm_sq)
            .fold(0.0, f64::max)
            + lambda;

        let mut constants = ProblemConstants::new(1.0, mu, l.max(mu))?;
        let mut problem = RidgeProblem {
            n,
            d,
            features,
            targets,
            lambda,
            constants: constants.clone(),
        };
        let w_star = Vector::new(w_star.iter().copied().collect())?;
        constants.f_star = Some(problem.loss(&w_star));
        constants.w_star = Some(w_star);
        problem.constants = constants;
        Ok(problem)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }
}

impl FiniteSumProblem for RidgeProblem {
    fn num_instances(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn instance_loss(&self, w: &[f64], i: usize) -> f64 {
        let r = linalg::dot(self.row(i), w) - self.targets[i];
        0.5 * r * r + 0.5 * self.lambda * linalg::norm_sq(w)
    }

    fn instance_gradient(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let x = self.row(i);
        let r = linalg::dot(x, w) - self.targets[i];
        for j in 0..self.d {
            out[j] = r * x[j] + self.lambda * w[j];
        }
    }

    fn constants(&self) -> Option<&ProblemConstants> {
        Some(&self.constants)
    }
}
