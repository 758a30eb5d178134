//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Monte Carlo seeds are fixed up front.

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use sebs::experiments::{
    optimal_batch_search, stability_probe, stage_error_validation, strategy_equivalence,
    BatchSearchConfig, EquivalenceConfig, StabilityConfig, ValidationConfig, ValidationMethod,
};
use sebs::optim::{
    psgd_step, run_msgd, run_psgd, AdaGradState, MsgdConfig, Penalty, PsgdConfig, ReturnMode,
    StageOptions,
};
use sebs::schedules::{adasebs_schedule, msebs_schedule, theorem1_schedule, TheoryInputs};
use sebs::stagewise::{complexity_report, BudgetRounding, EpochPlan, Method, ScheduleShape, StageSchedule};
use sebs::{
    minibatch_gradient, sample_batch, BatchIndices, DiagonalQuadraticProblem, Execution,
    FiniteSumProblem, RidgeProblem, Rng, RunStreams, Stream, Vector,
};

const DATA_SEED: u64 = 2020;
const DIRECTION_SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn synthetic(n: usize, d: usize, seed: u64) -> DiagonalQuadraticProblem {
    DiagonalQuadraticProblem::make_synthetic(n, d, &mut Rng::new(seed, Stream::Data)).unwrap()
}

fn start_at_distance(problem: &DiagonalQuadraticProblem, x: f64) -> Vector {
    let u = Rng::new(DIRECTION_SEED, Stream::Direction).unit_direction(problem.dim());
    let w: Vec<f64> = problem.mean().iter().zip(&u).map(|(m, u)| m + x * u).collect();
    Vector::new(w).unwrap()
}

fn update_counts() -> Outcome {
    let plan = |shape, rho| EpochPlan {
        n: 50_000,
        epochs: 160,
        boundaries: vec![80, 120],
        batch: 128,
        eta: 0.1,
        rho,
        shape,
    };
    let classical = StageSchedule::from_epochs(Method::vanilla(), &plan(ScheduleShape::Decay, 10.0)).unwrap();
    let enlarged = StageSchedule::from_epochs(Method::vanilla(), &plan(ScheduleShape::Enlarge, 12.0)).unwrap();
    let a = complexity_report(&classical);
    let b = complexity_report(&enlarged);
    Outcome {
        pass: a.total_updates == 62_500
            && b.total_updates.abs_diff(32_600) <= 100
            && a.total_gradients == 8_000_000
            && b.total_gradients == 8_000_000,
        detail: format!(
            "classical {} updates, enlarged {} updates, {} gradients each",
            a.total_updates, b.total_updates, a.total_gradients
        ),
    }
}

fn batch_trend() -> Outcome {
    let problem = synthetic(10_000, 100, DATA_SEED);
    let c = problem.exact_constants();
    let (eta_hi, eta_lo) = (c.alpha / (2.0 * c.l), c.alpha / (8.0 * c.l));
    let xs = [10.0, 20.0, 40.0, 80.0, 100.0];
    let cfg = BatchSearchConfig {
        x_grid: xs.to_vec(),
        direction_seed: DIRECTION_SEED,
        batch_grid: Vec::new(),
        theory_candidate: true,
        eta_list: vec![eta_hi, eta_lo],
        budget: 10_000,
        repeats: 20,
        seed: 1,
        return_mode: ReturnMode::Sampled,
    };
    let report = optimal_batch_search(&problem, &cfg, Execution::Parallel).unwrap();
    let hi: Vec<usize> = report.optima_for(eta_hi).map(|o| o.b_star).collect();
    let lo: Vec<usize> = report.optima_for(eta_lo).map(|o| o.b_star).collect();
    let slope = report
        .fits
        .iter()
        .find(|(e, _)| *e == eta_hi)
        .and_then(|(_, f)| *f)
        .map_or(f64::NAN, |f| f.slope);
    let ordered = hi.iter().zip(&lo).filter(|(h, l)| h >= l).count();
    Outcome {
        pass: (-1.4..=-0.6).contains(&slope) && ordered >= 4,
        detail: format!(
            "slope {slope:.3}, b* at alpha/(2L) {hi:?}, at alpha/(8L) {lo:?}, ordered {ordered}/5"
        ),
    }
}

fn stage_contraction() -> Outcome {
    let problem = synthetic(10_000, 100, DATA_SEED);
    let w_1 = start_at_distance(&problem, 10.0);
    let inputs = TheoryInputs::for_problem(&problem, &w_1, 2.0, 5).unwrap();
    let cfg = ValidationConfig {
        method: ValidationMethod::Sebs,
        seeds: 100,
        seed: 3,
        slack: 1.0,
        rounding: BudgetRounding::MultipleOfBatch,
        return_mode: ReturnMode::Sampled,
    };
    let report = stage_error_validation(&problem, &w_1, &inputs, &cfg, Execution::Parallel).unwrap();
    let ratios: Vec<String> = report
        .checks
        .iter()
        .skip(1)
        .map(|c| format!("{:.3}", c.mean_suboptimality / c.target))
        .collect();
    Outcome {
        pass: report.all_pass() && report.checks.len() == 6,
        detail: format!("mean/eps per stage [{}]", ratios.join(", ")),
    }
}

fn strategy_agreement() -> Outcome {
    let problem = synthetic(10_000, 100, DATA_SEED);
    let w_1 = start_at_distance(&problem, 10.0);
    let c = problem.exact_constants();
    let cfg = EquivalenceConfig {
        batch_1: 10,
        eta_1: c.alpha / (2.0 * c.l),
        rho: 2.0,
        stages: 4,
        budget_1: 10_000,
        seeds: 100,
        seed: 4,
        penalty: Penalty::None,
        return_mode: ReturnMode::Sampled,
    };
    let report = strategy_equivalence(&problem, &w_1, &cfg, Execution::Parallel).unwrap();
    let same_budget = complexity_report(&report.decay).total_gradients
        == complexity_report(&report.enlarge).total_gradients;
    let ladders_match = report
        .decay
        .stages
        .iter()
        .zip(&report.enlarge.stages)
        .all(|(a, b)| a.eta / a.batch as f64 == b.eta / b.batch as f64);
    let ratios: Vec<String> = report.points.iter().map(|p| format!("{:.3}", p.ratio)).collect();
    Outcome {
        pass: report.max_ratio <= 2.0 && same_budget && ladders_match,
        detail: format!("boundary ratios [{}]", ratios.join(", ")),
    }
}

/// Minimiser of a strictly convex 1-D function given its derivative, by
/// bisection on the derivative's sign.
fn argmin_1d(deriv: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while deriv(lo) > 0.0 {
        lo *= 2.0;
    }
    while deriv(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle_equivalence() -> Outcome {
    let mut failures = Vec::new();
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 1000,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let coords = (1usize..=5).prop_flat_map(|d| {
        (
            prop::collection::vec(-10.0..10.0f64, d),
            prop::collection::vec(-10.0..10.0f64, d),
            prop::collection::vec(-10.0..10.0f64, d),
            1e-3..1.0f64,
            prop_oneof![Just(None), (1e-2..10.0f64).prop_map(Some)],
        )
    });
    let psgd = runner.run(&coords, |(w, g, a, eta, gamma)| {
        let penalty = gamma.map_or(Penalty::None, Penalty::Gamma);
        let got = psgd_step(&w, &g, &a, eta, penalty);
        for j in 0..w.len() {
            let want = argmin_1d(|v| {
                let pen = gamma.map_or(0.0, |gm| (v - a[j]) / gm);
                g[j] + (v - w[j]) / eta + pen
            });
            prop_assert!((got[j] - want).abs() <= 1e-7, "coordinate {j}: {} vs {want}", got[j]);
        }
        Ok(())
    });
    if let Err(e) = psgd {
        failures.push(format!("psgd: {e}"));
    }

    let sequences = (1usize..=5, 1usize..=6).prop_flat_map(|(d, k)| {
        (
            prop::collection::vec(-5.0..5.0f64, d),
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), k),
            1e-2..3.0f64,
            prop_oneof![Just(1.0), 0.25..2.0f64],
            1e-2..2.0f64,
        )
    });
    let ada = runner.run(&sequences, |(anchor, grads, delta, nu, eta)| {
        let mut state = AdaGradState::new(Vector::new(anchor.clone()).unwrap(), delta, nu);
        let mut got = Vector::zeros(anchor.len());
        for g in &grads {
            got = state.update(g, eta);
        }
        for j in 0..anchor.len() {
            let z: f64 = grads.iter().map(|g| g[j]).sum();
            let h = (delta * delta + grads.iter().map(|g| g[j] * g[j]).sum::<f64>()).powf(nu);
            let want = argmin_1d(|v| z + h * (v - anchor[j]) / eta);
            prop_assert!((got[j] - want).abs() <= 1e-7, "coordinate {j}: {} vs {want}", got[j]);
        }
        Ok(())
    });
    if let Err(e) = ada {
        failures.push(format!("adagrad: {e}"));
    }

    // momentum with beta = 0 against plain SGD, same streams
    let problem = synthetic(200, 5, 31);
    let w_1 = start_at_distance(&problem, 3.0);
    let mut max_gap: f64 = 0.0;
    for seed in 0..20 {
        let p = run_psgd(
            &problem,
            &PsgdConfig {
                penalty: Penalty::None,
                eta: 0.05,
                batch: 7,
                budget: 700,
                return_mode: ReturnMode::Sampled,
            },
            &w_1,
            &mut RunStreams::new(seed),
            StageOptions::default(),
        )
        .unwrap();
        let m = run_msgd(
            &problem,
            &MsgdConfig {
                beta: 0.0,
                eta: 0.05,
                batch: 7,
                budget: 700,
                reset_momentum: true,
                return_mode: ReturnMode::Sampled,
            },
            &w_1,
            None,
            &mut RunStreams::new(seed),
            StageOptions::default(),
        )
        .unwrap();
        max_gap = max_gap
            .max(p.w_tau.distance(&m.w_tau))
            .max(p.w_last.distance(&m.w_last));
    }
    if max_gap > 1e-12 {
        failures.push(format!("momentum reduction gap {max_gap:e}"));
    }

    // mini-batch gradients against central differences of the batch loss
    let ridge = RidgeProblem::make_synthetic(60, 5, 0.1, 0.3, &mut Rng::new(5, Stream::Data)).unwrap();
    let quad = synthetic(60, 5, 6);
    let mut rng = Rng::new(8, Stream::Probe);
    let mut worst: f64 = 0.0;
    let problems: [&dyn FiniteSumProblem; 2] = [&ridge, &quad];
    for problem in problems {
        for _ in 0..50 {
            let w = rng.normal_vec(5);
            let batch: BatchIndices = sample_batch(&mut rng, 60, 9).unwrap();
            let g = minibatch_gradient(problem, &w, &batch).unwrap();
            let loss = |v: &[f64]| {
                batch.as_slice().iter().map(|&i| problem.instance_loss(v, i)).sum::<f64>() / 9.0
            };
            for j in 0..5 {
                let (mut up, mut dn) = (w.clone(), w.clone());
                up[j] += 1e-5;
                dn[j] -= 1e-5;
                let fd = (loss(&up) - loss(&dn)) / 2e-5;
                worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
            }
        }
    }
    if worst > 1e-4 {
        failures.push(format!("finite differences off by {worst:e}"));
    }

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("2000 subproblems, momentum gap {max_gap:e}, finite-difference error {worst:.1e}")
        } else {
            failures.join("; ")
        },
    }
}

fn coupled_steps() -> Outcome {
    let problem = synthetic(500, 10, 11);
    let w_1 = start_at_distance(&problem, 10.0);
    let inputs = TheoryInputs::for_problem(&problem, &w_1, 2.0, 4).unwrap();
    let mut schedule = theorem1_schedule(&inputs)
        .unwrap()
        .to_schedule(BudgetRounding::MultipleOfBatch)
        .unwrap();
    schedule.method = Method::Sgd {
        penalty: Penalty::Gamma(10.0),
    };
    let replacement = Rng::new(12, Stream::Data).normal_vec(10);
    let cfg = StabilityConfig {
        i0: 17,
        replacement: Some(replacement),
        grad_bound: None,
        seed: 13,
        schedule,
        probe_size: 1000,
        probe_seed: 14,
    };
    let report = stability_probe(&problem, &w_1, &cfg).unwrap();
    Outcome {
        pass: report.all_hold() && report.zero_before_contact && report.first_contact.is_some(),
        detail: format!(
            "{} steps, {:.1}% within bound, first contact at step {}, max delta {:.3e}",
            report.steps.len(),
            100.0 * report.fraction_holding(),
            report.first_contact.map_or("none".into(), |k| (k + 1).to_string()),
            report.max_delta
        ),
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn schedule_consistency() -> Outcome {
    let problem = synthetic(10_000, 100, DATA_SEED);
    let w_1 = start_at_distance(&problem, 10.0);
    let mut cases = vec![TheoryInputs::for_problem(&problem, &w_1, 2.0, 5).unwrap()];
    let mut rng = Rng::new(21, Stream::Probe);
    for _ in 0..20 {
        let mu = 0.1 + rng.uniform();
        cases.push(TheoryInputs {
            alpha: 0.2 + rng.uniform(),
            mu,
            l: mu * (1.0 + 100.0 * rng.uniform()),
            sigma2: 0.1 + 10.0 * rng.uniform(),
            rho: 1.5 + 10.0 * rng.uniform(),
            eps_1: 0.1 + 100.0 * rng.uniform(),
            eps_target: 1e-4,
            stages: None,
        });
    }
    let mut problems = Vec::new();
    for i in &cases {
        let (a, mu, l, s2, rho) = (i.alpha, i.mu, i.l, i.sigma2, i.rho);
        let sigma = s2.sqrt();

        let t1 = theorem1_schedule(i).unwrap();
        let theta = 32.0 * s2 * rho * rho / (a * a * mu);
        let mut ok = rel_eq(t1.theta, theta) && rel_eq(t1.eta, a / (2.0 * l));
        ok &= t1.gamma_min.is_some_and(|g| rel_eq(g, 4.0 * rho / (a * mu)) && 1.0 / g <= a * mu / (4.0 * rho) * (1.0 + 1e-15));
        for s in 0..t1.stages() {
            let eps = i.eps_1 / rho.powi(s as i32);
            let b = a * sigma * (mu * theta).sqrt() / (2.0 * 2f64.sqrt() * l * eps);
            let eta_s = 2f64.sqrt() * b * eps / (sigma * (mu * theta).sqrt());
            ok &= rel_eq(t1.batches[s], b) && rel_eq(t1.budgets[s], theta / eps);
            ok &= rel_eq(eta_s, a / (2.0 * l)) && t1.eta <= a / (2.0 * l);
        }
        if !ok {
            problems.push("theorem-1 schedule".to_string());
        }

        let beta = 0.9;
        let m = msebs_schedule(i, beta).unwrap();
        let theta = 8.0 * s2 * rho * rho / (a * a * mu * (1.0 - beta));
        let cap = a * (1.0 - beta).powi(2) / (2.0 * (1.0 + beta) * l);
        let mut ok = rel_eq(m.theta, theta) && rel_eq(m.eta, cap);
        for s in 0..m.stages() {
            let eps = i.eps_1 / rho.powi(s as i32);
            let b = a * sigma * (mu * theta * (1.0 - beta)).sqrt() / (2.0 * 2f64.sqrt() * (1.0 + beta) * l * eps);
            // learning rate balancing the one-stage momentum bound at (b, C)
            let c = theta / eps;
            let balanced = b * (1.0 - beta).powf(1.5) * (2.0 * eps / (mu * c)).sqrt() / sigma;
            ok &= rel_eq(m.batches[s], b) && rel_eq(m.budgets[s], c) && rel_eq(balanced, cap);
        }
        if !ok {
            problems.push("momentum schedule".to_string());
        }

        let delta_min = 8.0 * l * (2.0 * i.eps_1).sqrt() / (a * mu.sqrt());
        for delta in [delta_min, 3.0 * delta_min] {
            let ad = adasebs_schedule(i, delta).unwrap();
            let theta = 64.0 * s2 * rho * rho / (a * a * mu);
            let eta = a * delta * delta / (8.0 * l);
            let mut ok = rel_eq(ad.theta, theta) && rel_eq(ad.eta, eta) && delta >= delta_min;
            ok &= ad.delta_min.is_some_and(|d| rel_eq(d, delta_min));
            for s in 0..ad.stages() {
                let eps = i.eps_1 / rho.powi(s as i32);
                let b = a * sigma * (mu * theta).sqrt() / (8.0 * l * eps);
                let c = theta / eps;
                ok &= rel_eq(ad.batches[s], b) && rel_eq(ad.budgets[s], c);
                // one-stage AdaGrad preconditions, with ‖w̃ − w*‖ ≤ √(2ε_s/μ)
                ok &= delta * delta * b * b / (2.0 * s2 * c) >= 1.0 - 1e-12;
                ok &= eta >= delta * (2.0 * eps / mu).sqrt() * (1.0 - 1e-12);
            }
            if !ok {
                problems.push(format!("adagrad schedule at delta {delta:.3e}"));
            }
        }
        if adasebs_schedule(i, 0.999 * delta_min).is_ok() {
            problems.push("delta below bound accepted".to_string());
        }
    }
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{} input sets re-evaluated", cases.len())
        } else {
            problems.join("; ")
        },
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("update-count arithmetic", update_counts),
        ("optimal batch trend", batch_trend),
        ("stage contraction", stage_contraction),
        ("strategy equivalence", strategy_agreement),
        ("oracle equivalence", oracle_equivalence),
        ("coupled-run step bounds", coupled_steps),
        ("schedule self-consistency", schedule_consistency),
    ];
    let filter = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {verdict} ({:.1}s) {}",
            k + 1,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
