//! Finite-sum objectives `F(w) = (1/n) Σ_i f(w; ξ_i)` and their gradient oracles.

use crate::batch::BatchIndices;
use crate::error::{Error, Result};
use crate::linalg::{self, check_dim, Vector};
use crate::problems::ProblemConstants;

/// A dataset-backed loss with a per-instance gradient oracle.
///
/// Only the per-instance methods are required; the aggregate methods have
/// reference implementations that problems may override with faster
/// equivalents.
pub trait FiniteSumProblem: Send + Sync {
    /// Number of instances `n`.
    fn num_instances(&self) -> usize;

    fn dim(&self) -> usize;

    fn instance_loss(&self, w: &[f64], i: usize) -> f64;

    /// Writes `∇f(w; ξ_i)` into `out`.
    fn instance_gradient(&self, w: &[f64], i: usize, out: &mut [f64]);

    /// Exact constants, when the problem knows them.
    fn constants(&self) -> Option<&ProblemConstants> {
        None
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let n = self.num_instances();
        (0..n).map(|i| self.instance_loss(w, i)).sum::<f64>() / n as f64
    }

    /// Writes the mini-batch mean gradient into `out`.
    fn batch_gradient(&self, w: &[f64], batch: &[usize], out: &mut [f64]) {
        let mut scratch = vec![0.0; self.dim()];
        out.iter_mut().for_each(|x| *x = 0.0);
        for &i in batch {
            self.instance_gradient(w, i, &mut scratch);
            for (o, g) in out.iter_mut().zip(&scratch) {
                *o += g;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        out.iter_mut().for_each(|x| *x *= inv);
    }

    fn full_gradient(&self, w: &[f64], out: &mut [f64]) {
        let all: Vec<usize> = (0..self.num_instances()).collect();
        self.batch_gradient(w, &all, out);
    }

    /// `F(w) − F*` when `F*` is known.
    fn suboptimality(&self, w: &[f64]) -> Option<f64> {
        let f_star = self.constants()?.f_star?;
        Some(self.loss(w) - f_star)
    }
}

/// Mean gradient over `batch`, with finiteness checking.
pub fn minibatch_gradient<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    w: &[f64],
    batch: &BatchIndices,
) -> Result<Vector> {
    let mut out = vec![0.0; problem.dim()];
    minibatch_gradient_into(problem, w, batch.as_slice(), &mut out)?;
    Ok(Vector::from_raw(out))
}

/// Allocation-free variant of [`minibatch_gradient`] used by the solvers.
pub(crate) fn minibatch_gradient_into<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    w: &[f64],
    batch: &[usize],
    out: &mut [f64],
) -> Result<()> {
    check_dim(problem.dim(), w.len())?;
    let n = problem.num_instances();
    if batch.is_empty() || batch.len() > n {
        return Err(Error::InvalidBatch {
            batch: batch.len(),
            n,
        });
    }
    problem.batch_gradient(w, batch, out);
    if linalg::all_finite(out) {
        return Ok(());
    }
    let mut scratch = vec![0.0; problem.dim()];
    let offending = batch.iter().copied().find(|&i| {
        problem.instance_gradient(w, i, &mut scratch);
        !linalg::all_finite(&scratch)
    });
    Err(Error::NonFinite {
        what: "mini-batch gradient",
        index: offending,
    })
}

/// Full gradient `∇F(w)`.
pub fn full_gradient<P: FiniteSumProblem + ?Sized>(problem: &P, w: &[f64]) -> Result<Vector> {
    check_dim(problem.dim(), w.len())?;
    let mut out = vec![0.0; problem.dim()];
    problem.full_gradient(w, &mut out);
    Vector::new(out).map_err(|_| Error::NonFinite {
        what: "full gradient",
        index: None,
    })
}

/// Exact gradient variance `(1/n) Σ_i ‖∇f(w; ξ_i) − ∇F(w)‖²`.
///
/// The bounded-noise assumption is read as a bound on this second moment.
pub fn estimate_sigma2<P: FiniteSumProblem + ?Sized>(problem: &P, w: &[f64]) -> Result<f64> {
    let mean = full_gradient(problem, w)?;
    let n = problem.num_instances();
    let mut scratch = vec![0.0; problem.dim()];
    let mut total = 0.0;
    for i in 0..n {
        problem.instance_gradient(w, i, &mut scratch);
        total += scratch
            .iter()
            .zip(mean.iter())
            .map(|(g, m)| (g - m) * (g - m))
            .sum::<f64>();
    }
    let sigma2 = total / n as f64;
    if sigma2.is_finite() {
        Ok(sigma2)
    } else {
        Err(Error::NonFinite {
            what: "gradient variance",
            index: None,
        })
    }
}

/// Largest per-instance gradient norm at `w`.
pub fn max_instance_gradient_norm<P: FiniteSumProblem + ?Sized>(problem: &P, w: &[f64]) -> f64 {
    let mut scratch = vec![0.0; problem.dim()];
    (0..problem.num_instances())
        .map(|i| {
            problem.instance_gradient(w, i, &mut scratch);
            linalg::norm(&scratch)
        })
        .fold(0.0, f64::max)
}
