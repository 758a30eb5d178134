mod common;

use common::{start_at_distance, synthetic};
use sebs::optim::{
    psgd_step, run_adagrad, run_msgd, run_psgd, AdaGradConfig, MsgdConfig, Penalty, PsgdConfig,
    ReturnMode, StageOptions,
};
use sebs::oracle::full_gradient;
use sebs::{DiagonalQuadraticProblem, Error, FiniteSumProblem, RunStreams, TraceLevel, Vector};

fn psgd(penalty: Penalty, eta: f64, batch: usize, budget: u64) -> PsgdConfig {
    PsgdConfig {
        penalty,
        eta,
        batch,
        budget,
        return_mode: ReturnMode::Sampled,
    }
}

#[test]
fn single_step_budget_returns_second_iterate() {
    let p = synthetic(50, 3, 1);
    let w1 = start_at_distance(&p, 2.0, 1);
    let out = run_psgd(&p, &psgd(Penalty::None, 0.1, 5, 5), &w1, &mut RunStreams::new(3), StageOptions::default()).unwrap();
    assert_eq!(out.updates, 1);
    assert_eq!(out.tau, 2);
    assert_eq!(out.w_tau, out.w_last);
}

#[test]
fn budget_below_batch_is_an_error() {
    let p = synthetic(50, 3, 1);
    let err = run_psgd(&p, &psgd(Penalty::None, 0.1, 5, 4), &Vector::zeros(3), &mut RunStreams::new(3), StageOptions::default()).unwrap_err();
    assert!(matches!(err, Error::ZeroUpdates { budget: 4, batch: 5 }));
}

#[test]
fn zero_variance_matches_proximal_gradient_descent() {
    let xi = [0.5, -1.0, 2.0];
    let data: Vec<f64> = (0..20).flat_map(|_| xi).collect();
    let p = DiagonalQuadraticProblem::from_parts(20, 3, data, vec![1.0, 2.0, 3.0]).unwrap();
    let anchor = Vector::new(vec![3.0, 3.0, 3.0]).unwrap();
    let cfg = PsgdConfig {
        return_mode: ReturnMode::Last,
        ..psgd(Penalty::Gamma(0.7), 0.1, 4, 40)
    };
    let out = run_psgd(&p, &cfg, &anchor, &mut RunStreams::new(9), StageOptions::default()).unwrap();
    let mut w = anchor.clone();
    for _ in 0..10 {
        let g = full_gradient(&p, &w).unwrap();
        w = psgd_step(&w, &g, &anchor, 0.1, Penalty::Gamma(0.7));
    }
    for (a, b) in out.w_last.iter().zip(w.iter()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn gradient_accounting_is_m_times_b() {
    let p = synthetic(100, 4, 2);
    for level in [TraceLevel::Counts, TraceLevel::Iterations, TraceLevel::Full] {
        let opts = StageOptions { stage: 1, trace: level };
        let out = run_psgd(&p, &psgd(Penalty::Gamma(1.0), 0.05, 7, 100), &Vector::zeros(4), &mut RunStreams::new(1), opts).unwrap();
        assert_eq!(out.updates, 14);
        assert_eq!(out.trace.gradient_evals, 14 * 7);
        assert_eq!(out.trace.updates, 14);
        if level != TraceLevel::Counts {
            assert_eq!(out.trace.recorded_gradient_evals(), 98);
            let its: Vec<usize> = out.trace.records.iter().map(|r| r.iteration).collect();
            assert!(its.windows(2).all(|w| w[1] > w[0]));
        }
    }
}

#[test]
fn trace_level_does_not_change_trajectory() {
    let p = synthetic(100, 4, 2);
    let run = |trace| {
        run_psgd(&p, &psgd(Penalty::None, 0.05, 3, 90), &Vector::zeros(4), &mut RunStreams::new(5), StageOptions { stage: 1, trace }).unwrap()
    };
    let (a, b) = (run(TraceLevel::Counts), run(TraceLevel::Full));
    assert_eq!(a.w_tau, b.w_tau);
    assert_eq!(a.tau, b.tau);
}

#[test]
fn sampled_index_is_uniform() {
    let p = synthetic(30, 2, 3);
    let mut counts = [0usize; 4];
    for seed in 0..20_000 {
        let out = run_psgd(&p, &psgd(Penalty::None, 0.01, 2, 8), &Vector::zeros(2), &mut RunStreams::new(seed), StageOptions::default()).unwrap();
        counts[out.tau - 2] += 1;
    }
    for c in counts {
        assert!((c as f64 / 20_000.0 - 0.25).abs() < 0.015, "{counts:?}");
    }
}

#[test]
fn one_stage_sgd_bound_holds_on_average() {
    let p = synthetic(2000, 10, 4);
    let c = p.exact_constants();
    let w1 = start_at_distance(&p, 5.0, 2);
    let eta = c.alpha / (2.0 * c.l);
    let (batch, budget) = (4usize, 4000u64);
    let m = (budget / batch as u64) as f64;
    let reps = 200;
    let mut sum = 0.0;
    for seed in 0..reps {
        let out = run_psgd(&p, &psgd(Penalty::None, eta, batch, budget), &w1, &mut RunStreams::new(seed), StageOptions::default()).unwrap();
        sum += p.suboptimality(&out.w_tau).unwrap();
    }
    let dist2 = w1.distance(p.mean()).powi(2);
    let bound = dist2 / (c.alpha * m * eta) + eta * c.sigma2.unwrap() / (c.alpha * batch as f64);
    assert!(sum / reps as f64 <= 3.0 * bound, "{} vs {bound}", sum / reps as f64);
}

#[test]
fn large_learning_rate_warns() {
    let p = synthetic(50, 3, 1);
    let out = run_psgd(&p, &psgd(Penalty::None, 0.2, 5, 10), &Vector::zeros(3), &mut RunStreams::new(3), StageOptions::default()).unwrap();
    assert_eq!(out.warnings.len(), 1);
}

#[test]
fn divergence_is_a_numeric_error() {
    let p = synthetic(50, 3, 1);
    let err = run_psgd(&p, &psgd(Penalty::None, 10.0, 5, 50_000), &Vector::zeros(3), &mut RunStreams::new(3), StageOptions::default()).unwrap_err();
    assert!(err.is_numeric());
}

fn msgd(beta: f64, reset: bool, budget: u64) -> MsgdConfig {
    MsgdConfig {
        beta,
        eta: 0.01,
        batch: 2,
        budget,
        reset_momentum: reset,
        return_mode: ReturnMode::Last,
    }
}

#[test]
fn momentum_reset_first_update_ignores_carried_momentum() {
    let p = synthetic(40, 3, 6);
    let w1 = start_at_distance(&p, 1.0, 3);
    let carried = Vector::new(vec![5.0, -5.0, 5.0]).unwrap();
    let fresh = run_msgd(&p, &msgd(0.9, true, 2), &w1, Some(&carried), &mut RunStreams::new(4), StageOptions::default()).unwrap();
    let none = run_msgd(&p, &msgd(0.9, true, 2), &w1, None, &mut RunStreams::new(4), StageOptions::default()).unwrap();
    assert_eq!(fresh.w_last, none.w_last);
    // first update is exactly −ηg
    let u = fresh.momentum.unwrap();
    for j in 0..3 {
        assert!((fresh.w_last[j] - w1[j] - u[j]).abs() < 1e-15);
    }
    let carry = run_msgd(&p, &msgd(0.9, false, 2), &w1, Some(&carried), &mut RunStreams::new(4), StageOptions::default()).unwrap();
    assert_ne!(carry.w_last, fresh.w_last);
}

#[test]
fn adagrad_single_step_unrolled() {
    let p = synthetic(30, 4, 7);
    let w1 = start_at_distance(&p, 1.0, 1);
    let cfg = AdaGradConfig {
        delta: 2.0,
        nu: 0.5,
        eta: 0.3,
        batch: 30,
        budget: 30,
        return_mode: ReturnMode::Sampled,
    };
    let out = run_adagrad(&p, &cfg, &w1, &mut RunStreams::new(1), StageOptions::default()).unwrap();
    let g = full_gradient(&p, &w1).unwrap();
    for j in 0..4 {
        let want = w1[j] - 0.3 * g[j] / (4.0 + g[j] * g[j]).powf(0.5);
        assert!((out.w_tau[j] - want).abs() < 1e-12);
    }
}

#[test]
fn adagrad_precondition_warnings() {
    let p = synthetic(100, 3, 7);
    let w1 = start_at_distance(&p, 5.0, 1);
    let cfg = AdaGradConfig {
        delta: 0.1,
        nu: 1.0,
        eta: 1e-3,
        batch: 1,
        budget: 10,
        return_mode: ReturnMode::Sampled,
    };
    let out = run_adagrad(&p, &cfg, &w1, &mut RunStreams::new(1), StageOptions::default()).unwrap();
    assert_eq!(out.warnings.len(), 2);
}
