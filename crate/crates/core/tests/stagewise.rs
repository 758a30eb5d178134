mod common;

use common::{start_at_distance, synthetic};
use sebs::experiments::replicate_runs;
use sebs::optim::{run_adagrad, run_psgd, AdaGradConfig, Penalty, PsgdConfig, ReturnMode, StageOptions};
use sebs::schedules::{msebs_schedule, TheoryInputs};
use sebs::stagewise::{
    complexity_report, run_adasebs, run_classical_stagewise, run_msebs, run_sebs, run_stagewise,
    BudgetRounding, Method, ScheduleShape, StageSchedule,
};
use sebs::{Error, Execution, RunStreams, TraceLevel};

fn enlarge(method: Method, b1: f64, eta: f64, c1: f64, rho: f64, stages: usize) -> StageSchedule {
    StageSchedule::enlarge(method, b1, eta, c1, rho, stages, BudgetRounding::MultipleOfBatch).unwrap()
}

#[test]
fn single_stage_equals_single_solver_call() {
    let p = synthetic(200, 5, 1);
    let w1 = start_at_distance(&p, 3.0, 1);
    let s = enlarge(Method::Sgd { penalty: Penalty::Gamma(2.0) }, 4.0, 0.05, 400.0, 2.0, 1);
    let report = run_sebs(&p, &s, &w1, &mut RunStreams::new(8), TraceLevel::Counts).unwrap();
    let cfg = PsgdConfig {
        penalty: Penalty::Gamma(2.0),
        eta: 0.05,
        batch: 4,
        budget: 400,
        return_mode: ReturnMode::Sampled,
    };
    let out = run_psgd(&p, &cfg, &w1, &mut RunStreams::new(8), StageOptions::default()).unwrap();
    assert_eq!(report.final_iterate(), &out.w_tau);

    let ada = enlarge(Method::AdaGrad { delta: 3.0, nu: 1.0 }, 4.0, 0.5, 400.0, 2.0, 1);
    let report = run_adasebs(&p, &ada, &w1, &mut RunStreams::new(8), TraceLevel::Counts).unwrap();
    let cfg = AdaGradConfig {
        delta: 3.0,
        nu: 1.0,
        eta: 0.5,
        batch: 4,
        budget: 400,
        return_mode: ReturnMode::Sampled,
    };
    let out = run_adagrad(&p, &cfg, &w1, &mut RunStreams::new(8), StageOptions::default()).unwrap();
    assert_eq!(report.final_iterate(), &out.w_tau);
}

#[test]
fn stages_chain_bitwise() {
    let p = synthetic(200, 5, 1);
    let w1 = start_at_distance(&p, 3.0, 1);
    let s = enlarge(Method::vanilla(), 2.0, 0.05, 100.0, 2.0, 4);
    let report = run_sebs(&p, &s, &w1, &mut RunStreams::new(2), TraceLevel::Counts).unwrap();
    assert_eq!(report.anchors.len(), 5);
    // replay stage by stage from the recorded anchors with continuing streams
    let mut streams = RunStreams::new(2);
    for (k, spec) in s.stages.iter().enumerate() {
        let cfg = PsgdConfig {
            penalty: Penalty::None,
            eta: spec.eta,
            batch: spec.batch,
            budget: spec.budget,
            return_mode: ReturnMode::Sampled,
        };
        let out = run_psgd(&p, &cfg, &report.anchors[k], &mut streams, StageOptions::default()).unwrap();
        assert_eq!(out.w_tau, report.anchors[k + 1]);
    }
    let c = complexity_report(&s);
    assert_eq!(report.total_gradients, c.total_gradients);
    assert_eq!(report.total_updates, c.total_updates);
    assert_eq!(report.total_updates, report.stages.iter().map(|r| r.updates as u64).sum::<u64>());
}

#[test]
fn unit_ratio_is_vanilla_sgd_with_fresh_anchors() {
    let p = synthetic(200, 5, 1);
    let w1 = start_at_distance(&p, 3.0, 1);
    let s = enlarge(Method::vanilla(), 3.0, 0.05, 90.0, 1.0, 3);
    assert!(s.stages.iter().all(|x| x.batch == 3 && x.budget == 90));
    let a = run_sebs(&p, &s, &w1, &mut RunStreams::new(4), TraceLevel::Counts).unwrap();
    let decay = StageSchedule::decay(Method::vanilla(), 3, 0.05, 1.0, &[90, 90, 90]).unwrap();
    let b = run_classical_stagewise(&p, &decay, &w1, &mut RunStreams::new(4), TraceLevel::Counts).unwrap();
    assert_eq!(a.anchors, b.anchors);
}

#[test]
fn zero_momentum_matches_plain_sgd_stagewise() {
    let p = synthetic(300, 6, 3);
    let w1 = start_at_distance(&p, 3.0, 2);
    let sgd = enlarge(Method::vanilla(), 2.0, 0.02, 200.0, 2.0, 3);
    let mom = StageSchedule {
        method: Method::Momentum { beta: 0.0, reset: true },
        ..sgd.clone()
    };
    let a = run_sebs(&p, &sgd, &w1, &mut RunStreams::new(6), TraceLevel::Counts).unwrap();
    let b = run_msebs(&p, &mom, &w1, &mut RunStreams::new(6), TraceLevel::Counts).unwrap();
    assert_eq!(a.anchors, b.anchors);
}

#[test]
fn momentum_carry_changes_only_later_stages() {
    let p = synthetic(300, 6, 3);
    let w1 = start_at_distance(&p, 3.0, 2);
    let reset = enlarge(Method::Momentum { beta: 0.8, reset: true }, 2.0, 0.01, 200.0, 2.0, 3);
    let carry = StageSchedule {
        method: Method::Momentum { beta: 0.8, reset: false },
        ..reset.clone()
    };
    let a = run_msebs(&p, &reset, &w1, &mut RunStreams::new(6), TraceLevel::Counts).unwrap();
    let b = run_msebs(&p, &carry, &w1, &mut RunStreams::new(6), TraceLevel::Counts).unwrap();
    assert_eq!(a.anchors[1], b.anchors[1]);
    assert_ne!(a.anchors[2], b.anchors[2]);
}

#[test]
fn oversized_batches_are_clamped_with_warning() {
    let p = synthetic(50, 3, 5);
    let s = enlarge(Method::vanilla(), 20.0, 0.05, 100.0, 2.0, 3);
    let r = run_sebs(&p, &s, &sebs::Vector::zeros(3), &mut RunStreams::new(1), TraceLevel::Counts).unwrap();
    assert_eq!(r.stages[1].batch, 40);
    assert_eq!(r.stages[2].batch, 50);
    assert_eq!(r.warnings.len(), 1);
    assert_eq!(r.stages[2].updates, 400 / 50);
}

#[test]
fn drivers_check_method_and_shape() {
    let p = synthetic(50, 3, 5);
    let w = sebs::Vector::zeros(3);
    let s = enlarge(Method::vanilla(), 2.0, 0.05, 100.0, 2.0, 2);
    let mut st = RunStreams::new(1);
    assert!(matches!(run_msebs(&p, &s, &w, &mut st, TraceLevel::Counts), Err(Error::ScheduleShape(_))));
    assert!(matches!(run_classical_stagewise(&p, &s, &w, &mut st, TraceLevel::Counts), Err(Error::ScheduleShape(_))));
    let mut bent = s.clone();
    bent.stages[1].eta = 0.01;
    assert!(run_sebs(&p, &bent, &w, &mut st, TraceLevel::Counts).is_err());
    bent.shape = ScheduleShape::Free;
    assert!(run_stagewise(&p, &bent, &w, &mut st, TraceLevel::Counts).is_ok());
}

#[test]
fn enlarging_needs_fewer_updates_than_decay() {
    for rho in [1.5, 2.0, 3.0, 12.0] {
        for b1 in [1usize, 4, 32] {
            let e = enlarge(Method::vanilla(), b1 as f64, 0.1, 1000.0, rho, 4);
            let budgets: Vec<u64> = e.stages.iter().map(|s| s.budget).collect();
            let d = StageSchedule::decay(Method::vanilla(), b1, 0.1, rho, &budgets).unwrap();
            let (ce, cd) = (complexity_report(&e), complexity_report(&d));
            assert_eq!(ce.total_gradients, cd.total_gradients);
            assert!(ce.total_updates < cd.total_updates, "rho {rho} b1 {b1}");
        }
    }
}

#[test]
fn equivalent_ladders() {
    let e = enlarge(Method::vanilla(), 8.0, 0.1, 800.0, 2.0, 5);
    let budgets: Vec<u64> = e.stages.iter().map(|s| s.budget).collect();
    let d = StageSchedule::decay(Method::vanilla(), 8, 0.1, 2.0, &budgets).unwrap();
    for (k, (a, b)) in e.stages.iter().zip(&d.stages).enumerate() {
        let want = 0.1 / 8.0 * 2f64.powi(-(k as i32));
        assert_eq!(a.eta / a.batch as f64, want);
        assert_eq!(b.eta / b.batch as f64, want);
    }
}

#[test]
fn momentum_schedule_contracts_per_stage() {
    let p = synthetic(2000, 20, 9);
    let w1 = start_at_distance(&p, 10.0, 7);
    let inputs = TheoryInputs::for_problem(&p, &w1, 2.0, 4).unwrap();
    let s = msebs_schedule(&inputs, 0.5).unwrap().to_schedule(BudgetRounding::MultipleOfBatch).unwrap();
    let reports = replicate_runs(&p, &s, &w1, 100, 11, Execution::Parallel).unwrap();
    for k in 0..s.len() {
        let mean = reports.iter().map(|r| r.stages[k].suboptimality.unwrap()).sum::<f64>() / 100.0;
        assert!(mean <= 2.0 * s.eps[k + 1], "stage {}: {mean} vs {}", k + 1, s.eps[k + 1]);
    }
}

#[test]
fn parallel_and_sequential_replicates_agree() {
    let p = synthetic(300, 6, 3);
    let w1 = start_at_distance(&p, 3.0, 2);
    let s = enlarge(Method::vanilla(), 2.0, 0.02, 200.0, 2.0, 3);
    let a = replicate_runs(&p, &s, &w1, 16, 5, Execution::Parallel).unwrap();
    let b = replicate_runs(&p, &s, &w1, 16, 5, Execution::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn schedules_and_reports_round_trip_through_json() {
    let p = synthetic(300, 4, 2);
    let w1 = start_at_distance(&p, 3.0, 1);
    let schedule = enlarge(Method::Momentum { beta: 0.5, reset: false }, 2.0, 0.02, 100.0, 2.0, 3);
    let text = serde_json::to_string(&schedule).unwrap();
    assert_eq!(serde_json::from_str::<StageSchedule>(&text).unwrap(), schedule);

    let report = run_stagewise(&p, &schedule, &w1, &mut RunStreams::new(3), TraceLevel::Full).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<sebs::stagewise::RunReport>(&text).unwrap(), report);
}
