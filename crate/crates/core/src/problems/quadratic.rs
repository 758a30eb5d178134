use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::oracle::FiniteSumProblem;
use crate::problems::ProblemConstants;
use crate::rng::Rng;

/// `F(w) = (1/2n) Σ_i (w − ξ_i)ᵀ D (w − ξ_i)` with diagonal `D`.
///
/// The minimiser is the data mean ξ̄, the Hessian is `D`, and
/// `F(w) − F* = ½ (w − ξ̄)ᵀ D (w − ξ̄)`.
#[derive(Clone, Debug)]
pub struct DiagonalQuadraticProblem {
    n: usize,
    d: usize,
    /// Row-major `n × d`.
    data: Vec<f64>,
    diag: Vec<f64>,
    mean: Vec<f64>,
    constants: ProblemConstants,
}

impl DiagonalQuadraticProblem {
    /// `ξ_i ~ N(0, I_d)` drawn from `rng`, with `D = diag(1, 2, …, d)`.
    pub fn make_synthetic(n: usize, d: usize, rng: &mut Rng) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if d == 0 {
            return Err(Error::param("d", "must be at least 1"));
        }
        let data = rng.normal_vec(n * d);
        let diag = (1..=d).map(|j| j as f64).collect();
        Self::from_parts(n, d, data, diag)
    }

    pub fn from_parts(n: usize, d: usize, data: Vec<f64>, diag: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::param("n", "problem must have n >= 1 and d >= 1"));
        }
        linalg::check_dim(n * d, data.len())?;
        linalg::check_dim(d, diag.len())?;
        if !linalg::all_finite(&data) {
            return Err(Error::NonFinite {
                what: "instance data",
                index: None,
            });
        }
        if !diag.iter().all(|&x| x > 0.0 && x.is_finite()) {
            return Err(Error::param("diag", "entries must be positive and finite"));
        }

        let mut mean = vec![0.0; d];
        for row in data.chunks_exact(d) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut f_star = 0.0;
        let mut sigma2 = 0.0;
        for row in data.chunks_exact(d) {
            for j in 0..d {
                let dev = mean[j] - row[j];
                f_star += diag[j] * dev * dev;
                sigma2 += diag[j] * diag[j] * dev * dev;
            }
        }
        f_star /= 2.0 * n as f64;
        sigma2 /= n as f64;

        let l = diag.iter().copied().fold(f64::MIN, f64::max);
        let mu = diag.iter().copied().fold(f64::MAX, f64::min);
        let mut constants = ProblemConstants::new(1.0, mu, l)?;
        constants.w_star = Some(Vector::from_raw(mean.clone()));
        constants.f_star = Some(f_star);
        constants.sigma2 = Some(sigma2);

        Ok(DiagonalQuadraticProblem {
            n,
            d,
            data,
            diag,
            mean,
            constants,
        })
    }

    /// Neighbouring dataset: identical except instance `i0`, replaced by `xi`.
    pub fn with_instance(&self, i0: usize, xi: &[f64]) -> Result<Self> {
        if i0 >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i0,
                n: self.n,
            });
        }
        linalg::check_dim(self.d, xi.len())?;
        let mut data = self.data.clone();
        data[i0 * self.d..(i0 + 1) * self.d].copy_from_slice(xi);
        Self::from_parts(self.n, self.d, data, self.diag.clone())
    }

    /// α = 1, μ = min D, L = max D, plus w*, F* and σ² computed exactly.
    pub fn exact_constants(&self) -> ProblemConstants {
        self.constants.clone()
    }

    pub fn instance(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `f(w; ξ)` for an arbitrary instance, e.g. a held-out probe point.
    pub fn loss_at(&self, w: &[f64], xi: &[f64]) -> f64 {
        0.5 * w
            .iter()
            .zip(xi)
            .zip(&self.diag)
            .map(|((w, x), d)| d * (w - x) * (w - x))
            .sum::<f64>()
    }

    /// Writes `n,d`, then the diagonal, then one row per instance.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{},{}", self.n, self.d)?;
        write_row(&mut out, &self.diag)?;
        for row in self.data.chunks_exact(self.d) {
            write_row(&mut out, row)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(Error::Parse {
                    line: 0,
                    reason: format!("missing {what}"),
                }),
            }
        };
        let (lineno, header) = next("header")?;
        let dims = parse_row(&header, lineno)?;
        if dims.len() != 2 || dims.iter().any(|x| x.fract() != 0.0 || *x < 1.0) {
            return Err(Error::Parse {
                line: lineno,
                reason: "expected `n,d`".into(),
            });
        }
        let (n, d) = (dims[0] as usize, dims[1] as usize);
        let (lineno, diag_line) = next("diagonal")?;
        let diag = parse_row(&diag_line, lineno)?;
        if diag.len() != d {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected {d} diagonal entries"),
            });
        }
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let (lineno, line) = next("instance row")?;
            let row = parse_row(&line, lineno)?;
            if row.len() != d {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("expected {d} values"),
                });
            }
            data.extend(row);
        }
        Self::from_parts(n, d, data, diag)
    }
}

fn write_row<W: Write>(out: &mut W, row: &[f64]) -> Result<()> {
    let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
    writeln!(out, "{}", cells.join(","))?;
    Ok(())
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|cell| {
            cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                reason: format!("`{}`: {e}", cell.trim()),
            })
        })
        .collect()
}

impl FiniteSumProblem for DiagonalQuadraticProblem {
    fn num_instances(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn instance_loss(&self, w: &[f64], i: usize) -> f64 {
        self.loss_at(w, self.instance(i))
    }

    fn instance_gradient(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let xi = self.instance(i);
        for j in 0..self.d {
            out[j] = self.diag[j] * (w[j] - xi[j]);
        }
    }

    fn constants(&self) -> Option<&ProblemConstants> {
        Some(&self.constants)
    }

    /// `D (w − mean of the batch instances)`.
    fn batch_gradient(&self, w: &[f64], batch: &[usize], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for &i in batch {
            for (o, x) in out.iter_mut().zip(self.instance(i)) {
                *o += x;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        for j in 0..self.d {
            out[j] = self.diag[j] * (w[j] - out[j] * inv);
        }
    }

    fn full_gradient(&self, w: &[f64], out: &mut [f64]) {
        for j in 0..self.d {
            out[j] = self.diag[j] * (w[j] - self.mean[j]);
        }
    }

    fn suboptimality(&self, w: &[f64]) -> Option<f64> {
        Some(
            0.5 * w
                .iter()
                .zip(&self.mean)
                .zip(&self.diag)
                .map(|((w, m), d)| d * (w - m) * (w - m))
                .sum::<f64>(),
        )
    }
}
