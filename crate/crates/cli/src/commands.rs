use serde::Serialize;
use serde_json::json;

use sebs::experiments::{
    optimal_batch_search, stability_probe, stage_error_validation, strategy_equivalence, BatchSearchConfig,
    EquivalenceConfig, StabilityConfig, ValidationConfig, ValidationMethod,
};
use sebs::optim::Penalty;
use sebs::report::stage_table;
use sebs::stagewise::{
    run_adasebs, run_classical_stagewise, run_msebs, run_sebs, run_stagewise, Method, ScheduleShape,
};
use sebs::{Execution, Rng, RunStreams, Stream, TraceLevel};

use crate::config::{ExplicitSpec, MethodKind, Problem};
use crate::output::Context;
use crate::CliError;

fn missing(table: &str) -> CliError {
    CliError::Config(format!("`{table}`: table required by this command"))
}

pub fn run(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let problem = cfg.build_problem()?;
    let w_1 = cfg.start_point(&problem)?;
    let (schedule, _) = cfg.build_schedule(&problem, &w_1)?;
    let p = problem.as_dyn();
    let mut streams = RunStreams::new(ctx.seed);
    let driver = if schedule.shape == ScheduleShape::Free {
        run_stagewise
    } else {
        match cfg.method {
            MethodKind::SgdClassical => run_classical_stagewise,
            MethodKind::Sebs => run_sebs,
            MethodKind::Msebs => run_msebs,
            MethodKind::Adasebs => run_adasebs,
        }
    };
    let report = driver(p, &schedule, &w_1, &mut streams, cfg.trace)?;

    let stages = stage_table(&report, Some(&ctx.comment()));
    ctx.write_csv("stages.csv", stages)?;
    if report.trace.level != TraceLevel::Counts {
        let mut t = ctx.table(&["stage", "iteration", "batch", "loss", "grad_norm", "dist_to_opt"]);
        for r in &report.trace.records {
            t.row(vec![
                r.stage.into(),
                r.iteration.into(),
                r.batch_size.into(),
                r.loss.into(),
                r.grad_norm.into(),
                r.dist_to_opt.into(),
            ])?;
        }
        ctx.write_csv("trace.csv", t)?;
    }
    let final_gap = report.stages.last().and_then(|s| s.suboptimality);
    println!(
        "{} stages, {} updates, {} gradients, final suboptimality {}",
        report.stages.len(),
        report.total_updates,
        report.gradient_evals,
        final_gap.map_or("unknown".into(), |g| format!("{g:e}")),
    );
    let summary = json!({
        "stages": report.stages.len(),
        "initial_suboptimality": report.initial_suboptimality,
        "final_suboptimality": final_gap,
        "total_gradients": report.total_gradients,
        "total_updates": report.total_updates,
        "gradient_evals": report.gradient_evals,
    });
    ctx.write_manifest(summary, &report.warnings)
}

pub fn figure2(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let spec = cfg.figure2.as_ref().ok_or_else(|| missing("figure2"))?;
    let problem = cfg.build_problem()?;
    let search = BatchSearchConfig {
        x_grid: spec.x_grid.clone(),
        direction_seed: spec.direction_seed.unwrap_or(cfg.start.direction_seed),
        batch_grid: spec.batch_grid.clone(),
        theory_candidate: spec.theory_candidate,
        eta_list: spec.eta_list.clone(),
        budget: spec.budget.unwrap_or(cfg.problem.n as u64),
        repeats: spec.repeats,
        seed: ctx.seed,
        return_mode: cfg.return_mode,
    };
    let report = optimal_batch_search(problem.as_dyn(), &search, Execution::Parallel)?;

    let mut t = ctx.table(&["row", "x", "eta", "b_star", "mean_error", "predicted_b", "slope", "intercept"]);
    for o in &report.optima {
        t.row(vec![
            "optimum".into(),
            o.x.into(),
            o.eta.into(),
            o.b_star.into(),
            o.mean_error.into(),
            o.predicted.into(),
            None::<f64>.into(),
            None::<f64>.into(),
        ])?;
    }
    let mut fits = Vec::new();
    for (eta, fit) in &report.fits {
        t.row(vec![
            "fit".into(),
            None::<f64>.into(),
            (*eta).into(),
            None::<usize>.into(),
            None::<f64>.into(),
            None::<f64>.into(),
            fit.map(|f| f.slope).into(),
            fit.map(|f| f.intercept).into(),
        ])?;
        if let Some(f) = fit {
            println!("eta {eta:e}: log-log slope {:.4}, intercept {:.4}", f.slope, f.intercept);
        }
        fits.push(json!({ "eta": eta, "slope": fit.map(|f| f.slope), "intercept": fit.map(|f| f.intercept) }));
    }
    ctx.write_csv("figure2.csv", t)?;

    let mut grid = ctx.table(&["x", "eta", "batch", "mean_error"]);
    for g in &report.points {
        grid.row(vec![g.x.into(), g.eta.into(), g.batch.into(), g.mean_error.into()])?;
    }
    ctx.write_csv("figure2_grid.csv", grid)?;
    ctx.write_manifest(json!({ "fits": fits }), &report.warnings)
}

pub fn validate(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let spec = cfg.validate.as_ref().ok_or_else(|| missing("validate"))?;
    let problem = cfg.build_problem()?;
    let w_1 = cfg.start_point(&problem)?;
    let inputs = cfg.theory_inputs(&problem, &w_1)?;
    let method = match cfg.method {
        MethodKind::Sebs => ValidationMethod::Sebs,
        MethodKind::Msebs => ValidationMethod::Msebs { beta: cfg.optimizer.beta },
        MethodKind::Adasebs => ValidationMethod::AdaSebs { delta: cfg.optimizer.delta },
        MethodKind::SgdClassical => unreachable!("rejected during validation"),
    };
    let vcfg = ValidationConfig {
        method,
        seeds: spec.seeds,
        seed: ctx.seed,
        slack: spec.slack,
        rounding: cfg.schedule.as_ref().map(|s| s.rounding).unwrap_or_default(),
        return_mode: cfg.return_mode,
    };
    let report = stage_error_validation(problem.as_dyn(), &w_1, &inputs, &vcfg, Execution::Parallel)?;

    let mut t = ctx.table(&["stage", "target", "mean_suboptimality", "pass"]);
    for c in &report.checks {
        t.row(vec![c.stage.into(), c.target.into(), c.mean_suboptimality.into(), c.pass.into()])?;
        println!(
            "stage {}: mean {:e} vs target {:e} {}",
            c.stage,
            c.mean_suboptimality,
            c.target,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    ctx.write_csv("validate.csv", t)?;
    let summary = json!({ "all_pass": report.all_pass(), "stages": report.schedule.len() });
    ctx.write_manifest(summary, &report.warnings)
}

pub fn equivalence(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let spec = cfg.equivalence.as_ref().ok_or_else(|| missing("equivalence"))?;
    let problem = cfg.build_problem()?;
    let w_1 = cfg.start_point(&problem)?;
    let penalty = match cfg.optimizer.gamma {
        Some(g) if g.is_finite() => Penalty::Gamma(g),
        _ => Penalty::None,
    };
    let ecfg = EquivalenceConfig {
        batch_1: spec.batch_1,
        eta_1: spec.eta_1,
        rho: spec.rho,
        stages: spec.stages,
        budget_1: spec.budget_1,
        seeds: spec.seeds,
        seed: ctx.seed,
        penalty,
        return_mode: cfg.return_mode,
    };
    let report = strategy_equivalence(problem.as_dyn(), &w_1, &ecfg, Execution::Parallel)?;

    let mut t = ctx.table(&["stage", "cumulative_gradients", "mean_decay", "mean_enlarge", "ratio"]);
    for p in &report.points {
        t.row(vec![
            p.stage.into(),
            p.cumulative_gradients.into(),
            p.mean_decay.into(),
            p.mean_enlarge.into(),
            p.ratio.into(),
        ])?;
    }
    ctx.write_csv("equivalence.csv", t)?;
    println!("largest ratio between strategies: {:.4}", report.max_ratio);
    let summary = json!({
        "initial_suboptimality": report.initial_suboptimality,
        "max_ratio": report.max_ratio,
    });
    ctx.write_manifest(summary, &[])
}

pub fn stability(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let spec = cfg.stability.as_ref().ok_or_else(|| missing("stability"))?;
    let problem = cfg.build_problem()?;
    let Problem::Quadratic(quadratic) = &problem else {
        return Err(CliError::Config("`problem.family`: stability needs the quadratic family".into()));
    };
    let w_1 = cfg.start_point(&problem)?;
    let (schedule, _) = cfg.build_schedule(&problem, &w_1)?;
    let scfg = StabilityConfig {
        i0: spec.i0,
        replacement: spec
            .replacement_seed
            .map(|s| Rng::new(s, Stream::Data).normal_vec(cfg.problem.d)),
        grad_bound: spec.grad_bound,
        seed: ctx.seed,
        schedule,
        probe_size: spec.probe_size,
        probe_seed: spec.probe_seed,
    };
    let report = stability_probe(quadratic, &w_1, &scfg)?;

    let mut t = ctx.table(&["stage", "iteration", "contains_i0", "delta", "delta_next", "bound", "holds"]);
    for s in &report.steps {
        t.row(vec![
            s.stage.into(),
            s.iteration.into(),
            s.contains_i0.into(),
            s.delta.into(),
            s.delta_next.into(),
            s.bound.into(),
            s.holds.into(),
        ])?;
    }
    ctx.write_csv("stability.csv", t)?;
    println!(
        "{} steps, {:.2}% within bound, max delta {:e}",
        report.steps.len(),
        100.0 * report.fraction_holding(),
        report.max_delta
    );
    let summary = json!({
        "steps": report.steps.len(),
        "fraction_holding": report.fraction_holding(),
        "first_contact": report.first_contact,
        "zero_before_contact": report.zero_before_contact,
        "max_delta": report.max_delta,
        "final_delta": report.final_delta,
        "measured_grad_bound": report.measured_grad_bound,
        "stability_bound": report.stability_bound,
        "eps_stab_estimate": report.eps_stab_estimate,
    });
    ctx.write_manifest(summary, &[])
}

#[derive(Serialize)]
struct OptimizerOut {
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carry_momentum: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
}

#[derive(Serialize)]
struct ScheduleOut {
    explicit: ExplicitSpec,
}

#[derive(Serialize)]
struct Derived {
    theta: f64,
    eta: f64,
    eta_cap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_min: Option<f64>,
    batches: Vec<f64>,
    budgets: Vec<f64>,
}

#[derive(Serialize)]
struct Fragment {
    optimizer: OptimizerOut,
    schedule: ScheduleOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    derived: Option<Derived>,
}

pub fn schedule(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let problem = cfg.build_problem()?;
    let w_1 = cfg.start_point(&problem)?;
    let (schedule, theory) = cfg.build_schedule(&problem, &w_1)?;
    let none = OptimizerOut {
        gamma: None,
        beta: None,
        carry_momentum: None,
        delta: None,
        nu: None,
    };
    let optimizer = match schedule.method {
        Method::Sgd { penalty } => OptimizerOut {
            gamma: Some(match penalty {
                Penalty::None => f64::INFINITY,
                Penalty::Gamma(g) => g,
            }),
            ..none
        },
        Method::Momentum { beta, reset } => OptimizerOut {
            beta: Some(beta),
            carry_momentum: Some(!reset),
            ..none
        },
        Method::AdaGrad { delta, nu } => OptimizerOut {
            delta: Some(delta),
            nu: Some(nu),
            ..none
        },
    };
    let fragment = Fragment {
        optimizer,
        schedule: ScheduleOut {
            explicit: ExplicitSpec {
                rho: Some(schedule.rho).filter(|r| *r > 1.0),
                shape: Some(schedule.shape),
                eps: schedule.eps.clone(),
                stages: schedule.stages.clone(),
            },
        },
        derived: theory.map(|t| Derived {
            theta: t.theta,
            eta: t.eta,
            eta_cap: t.eta_cap,
            gamma_min: t.gamma_min,
            delta_min: t.delta_min,
            batches: t.batches,
            budgets: t.budgets,
        }),
    };
    let body = toml::to_string(&fragment).map_err(|e| CliError::Config(e.to_string()))?;
    print!("# {}\n{body}", ctx.comment());
    Ok(())
}
