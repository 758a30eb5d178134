use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::FiniteSumProblem;
use crate::optim::{run_psgd, Penalty, PsgdConfig, ReturnMode, StageOptions};
use crate::par::{try_map_indices, Execution};
use crate::rng::{replicate_seed, Rng, RunStreams, Stream};
use crate::schedules::optimal_pair_eq5;

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSearchConfig {
    /// Initial distances `x`, with `w_1 = w* + x·u` for a fixed unit `u`.
    pub x_grid: Vec<f64>,
    pub direction_seed: u64,
    /// Candidate batch sizes; empty means powers of two up to the budget.
    #[serde(default)]
    pub batch_grid: Vec<usize>,
    /// Also try the batch size predicted by the optimal-pair relation.
    #[serde(default = "yes")]
    pub theory_candidate: bool,
    /// Learning rates; empty means `α/(2L), α/(4L), α/(8L)`.
    #[serde(default)]
    pub eta_list: Vec<f64>,
    pub budget: u64,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default)]
    pub return_mode: ReturnMode,
}

impl BatchSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.x_grid.is_empty() || self.x_grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::param("x_grid", "needs at least one positive distance"));
        }
        if self.budget == 0 {
            return Err(Error::param("budget", "must be positive"));
        }
        if self.repeats == 0 {
            return Err(Error::param("repeats", "must be at least 1"));
        }
        if self.eta_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::param("eta_list", "learning rates must be positive"));
        }
        if self.batch_grid.contains(&0) {
            return Err(Error::param("batch_grid", "batch sizes must be at least 1"));
        }
        Ok(())
    }
}

/// Powers of two not exceeding `limit`.
pub fn default_batch_grid(limit: u64) -> Vec<usize> {
    std::iter::successors(Some(1u64), |b| b.checked_mul(2))
        .take_while(|b| *b <= limit)
        .map(|b| b as usize)
        .collect()
}

pub fn default_etas(alpha: f64, l: f64) -> Vec<f64> {
    vec![alpha / (2.0 * l), alpha / (4.0 * l), alpha / (8.0 * l)]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub eta: f64,
    pub batch: usize,
    pub mean_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchOptimum {
    pub x: f64,
    pub eta: f64,
    pub b_star: usize,
    /// Mean `‖ŵ − w*‖` at `b_star`.
    pub mean_error: f64,
    /// Batch size the optimal-pair relation predicts for this `(x, η)`.
    pub predicted: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSearchReport {
    pub points: Vec<GridPoint>,
    pub optima: Vec<BatchOptimum>,
    /// Fit of `ln b*` on `ln x` per learning rate, when at least two
    /// distinct `x` were searched.
    pub fits: Vec<(f64, Option<LogLogFit>)>,
    pub warnings: Vec<String>,
}

impl BatchSearchReport {
    pub fn optima_for(&self, eta: f64) -> impl Iterator<Item = &BatchOptimum> {
        self.optima.iter().filter(move |o| o.eta == eta)
    }
}

/// Least-squares line through `(ln x, ln y)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<LogLogFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(LogLogFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// For each `(x, η)`, runs plain SGD at every candidate batch size with the
/// same replicate seeds and returns the batch size with the smallest mean
/// distance to the optimum. Ties go to the smaller batch.
pub fn optimal_batch_search<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    cfg: &BatchSearchConfig,
    exec: Execution,
) -> Result<BatchSearchReport> {
    cfg.validate()?;
    let c = problem
        .constants()
        .ok_or(Error::MissingConstants("alpha, L"))?;
    let w_star = c.w_star.clone().ok_or(Error::MissingConstants("w_star"))?;
    let n = problem.num_instances();
    let etas = if cfg.eta_list.is_empty() {
        default_etas(c.alpha, c.l)
    } else {
        cfg.eta_list.clone()
    };
    let sigma = match c.sigma2 {
        Some(s) => s.sqrt(),
        None => crate::oracle::estimate_sigma2(problem, &w_star)?.sqrt(),
    };
    let direction = Rng::new(cfg.direction_seed, Stream::Direction).unit_direction(problem.dim());

    let mut warnings = Vec::new();
    let base_grid = if cfg.batch_grid.is_empty() {
        default_batch_grid(cfg.budget)
    } else {
        cfg.batch_grid.clone()
    };
    let limit = (n as u64).min(cfg.budget) as usize;
    let mut grid: Vec<usize> = Vec::new();
    for &b in &base_grid {
        if b > limit {
            let msg = format!("batch {b} skipped: exceeds min(budget, n) = {limit}");
            log::warn!("{msg}");
            warnings.push(msg);
        } else {
            grid.push(b);
        }
    }

    // one cell per (x, η) with its own candidate list
    struct Cell {
        x: f64,
        eta: f64,
        start: Vector,
        predicted: f64,
        candidates: Vec<usize>,
    }
    let mut cells = Vec::new();
    for &x in &cfg.x_grid {
        let start: Vec<f64> = w_star.iter().zip(&direction).map(|(w, u)| w + x * u).collect();
        for &eta in &etas {
            // η* = dist·b/(σ√C) solved for b at this η
            let unit = optimal_pair_eq5(cfg.budget as f64, x, sigma, c.alpha, c.l, 1.0);
            let predicted = eta / unit.eta_star;
            let mut candidates = grid.clone();
            if cfg.theory_candidate {
                let b = (predicted.round() as usize).clamp(1, limit.max(1));
                if !candidates.contains(&b) {
                    candidates.push(b);
                }
            }
            candidates.sort_unstable();
            cells.push(Cell {
                x,
                eta,
                start: Vector::new(start.clone())?,
                predicted,
                candidates,
            });
        }
    }
    if grid.is_empty() && !cfg.theory_candidate {
        return Err(Error::param("batch_grid", "no candidate fits the budget"));
    }

    let mut tasks = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        for &b in &cell.candidates {
            for r in 0..cfg.repeats {
                tasks.push((ci, b, r));
            }
        }
    }
    let errors = try_map_indices(exec, tasks.len(), |t| {
        let (ci, b, r) = tasks[t];
        let cell = &cells[ci];
        let psgd = PsgdConfig {
            penalty: Penalty::None,
            eta: cell.eta,
            batch: b,
            budget: cfg.budget,
            return_mode: cfg.return_mode,
        };
        let mut streams = RunStreams::new(replicate_seed(cfg.seed, r as u64));
        let out = run_psgd(problem, &psgd, &cell.start, &mut streams, StageOptions::default())?;
        Ok::<_, Error>(out.w_tau.distance(&w_star))
    })?;

    let mut points = Vec::new();
    let mut optima = Vec::new();
    let mut k = 0;
    for cell in &cells {
        let mut best: Option<GridPoint> = None;
        for &b in &cell.candidates {
            let sum: f64 = errors[k..k + cfg.repeats].iter().sum();
            k += cfg.repeats;
            let point = GridPoint {
                x: cell.x,
                eta: cell.eta,
                batch: b,
                mean_error: sum / cfg.repeats as f64,
            };
            if best.is_none_or(|p| point.mean_error < p.mean_error) {
                best = Some(point);
            }
            points.push(point);
        }
        let best = best.expect("every cell has a candidate");
        optima.push(BatchOptimum {
            x: cell.x,
            eta: cell.eta,
            b_star: best.batch,
            mean_error: best.mean_error,
            predicted: cell.predicted,
        });
    }

    let fits = etas
        .iter()
        .map(|&eta| {
            let (xs, bs): (Vec<f64>, Vec<f64>) = optima
                .iter()
                .filter(|o| o.eta == eta)
                .map(|o| (o.x, o.b_star as f64))
                .unzip();
            (eta, loglog_fit(&xs, &bs))
        })
        .collect();

    Ok(BatchSearchReport {
        points,
        optima,
        fits,
        warnings,
    })
}
