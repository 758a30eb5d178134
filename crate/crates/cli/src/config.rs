//! Run configuration: a TOML document with one problem, one start point and
//! exactly one schedule spec, plus per-subcommand tables.

use serde::{Deserialize, Serialize};

use sebs::optim::{Penalty, ReturnMode};
use sebs::schedules::{adasebs_delta_min, adasebs_schedule, msebs_schedule, theorem1_schedule, TheoryInputs, TheoryOutputs};
use sebs::stagewise::{BudgetRounding, EpochPlan, Method, ScheduleShape, StageSchedule, StageSpec};
use sebs::{DiagonalQuadraticProblem, FiniteSumProblem, Rng, RidgeProblem, Stream, TraceLevel, Vector};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    SgdClassical,
    #[default]
    Sebs,
    Msebs,
    Adasebs,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(default)]
    pub method: MethodKind,
    #[serde(default)]
    pub return_mode: ReturnMode,
    #[serde(default)]
    pub trace: TraceLevel,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    pub figure2: Option<Figure2Spec>,
    pub validate: Option<ValidateSpec>,
    pub equivalence: Option<EquivalenceSpec>,
    pub stability: Option<StabilitySpec>,
    /// Informational values written by `sebs schedule`; ignored on input.
    #[allow(dead_code)]
    #[serde(default)]
    pub derived: Option<toml::Table>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Quadratic,
    Ridge,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub family: Family,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Ridge only.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Ridge only: target noise level.
    #[serde(default = "one")]
    pub noise: f64,
}

fn default_lambda() -> f64 {
    0.1
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    /// `w_1 = w* + distance·u` for a seeded unit direction `u`.
    pub distance: Option<f64>,
    #[serde(default)]
    pub direction_seed: u64,
    /// Explicit start point; excludes `distance`.
    pub point: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    /// Penalty for SGD; `inf` disables it. Theory schedules default to the
    /// smallest admissible value, other schedules to no penalty.
    pub gamma: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub carry_momentum: bool,
    /// AdaGrad δ; theory schedules default to the smallest admissible value.
    pub delta: Option<f64>,
    #[serde(default = "one")]
    pub nu: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            gamma: None,
            beta: default_beta(),
            carry_momentum: false,
            delta: None,
            nu: 1.0,
        }
    }
}

fn default_beta() -> f64 {
    0.9
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub theory: Option<TheorySpec>,
    pub explicit: Option<ExplicitSpec>,
    pub epochs: Option<EpochSpec>,
    #[serde(default)]
    pub rounding: BudgetRounding,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    pub rho: f64,
    pub stages: Option<usize>,
    pub eps_target: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub shape: Option<ScheduleShape>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    pub stages: Vec<StageSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochSpec {
    pub epochs: usize,
    pub boundaries: Vec<usize>,
    pub batch: usize,
    pub eta: f64,
    pub rho: f64,
    pub shape: Option<ScheduleShape>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
    #[serde(default)]
    pub prefix: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure2Spec {
    pub x_grid: Vec<f64>,
    pub direction_seed: Option<u64>,
    #[serde(default)]
    pub batch_grid: Vec<usize>,
    #[serde(default = "yes")]
    pub theory_candidate: bool,
    #[serde(default)]
    pub eta_list: Vec<f64>,
    /// Defaults to one pass over the data.
    pub budget: Option<u64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn yes() -> bool {
    true
}

fn default_repeats() -> usize {
    50
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "one")]
    pub slack: f64,
}

fn default_seeds() -> usize {
    100
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceSpec {
    pub batch_1: usize,
    pub eta_1: f64,
    pub rho: f64,
    pub stages: usize,
    pub budget_1: u64,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    pub i0: usize,
    /// Seed for the replacement instance; absent keeps both datasets equal.
    pub replacement_seed: Option<u64>,
    pub grad_bound: Option<f64>,
    #[serde(default = "default_probe")]
    pub probe_size: usize,
    #[serde(default)]
    pub probe_seed: u64,
}

fn default_probe() -> usize {
    1000
}

pub enum Problem {
    Quadratic(DiagonalQuadraticProblem),
    Ridge(RidgeProblem),
}

impl Problem {
    pub fn as_dyn(&self) -> &dyn FiniteSumProblem {
        match self {
            Problem::Quadratic(p) => p,
            Problem::Ridge(p) => p,
        }
    }

    pub fn w_star(&self) -> Vector {
        self.as_dyn()
            .constants()
            .and_then(|c| c.w_star.clone())
            .expect("built-in problems know their minimiser")
    }
}

fn field(name: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{name}`: {reason}"))
}

fn require_rho(name: &str, rho: f64) -> Result<(), CliError> {
    if rho > 1.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("must exceed 1, got {rho}")))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no data; the library validates the rest when building.
    fn validate(&self) -> Result<(), CliError> {
        if self.problem.n == 0 {
            return Err(field("problem.n", "must be at least 1"));
        }
        if self.problem.d == 0 {
            return Err(field("problem.d", "must be at least 1"));
        }
        if self.start.distance.is_some() && self.start.point.is_some() {
            return Err(field("start", "give either distance or point, not both"));
        }
        if let Some(x) = self.start.distance {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(field("start.distance", "must be non-negative"));
            }
        }
        if let Some(p) = &self.start.point {
            if p.len() != self.problem.d {
                return Err(field("start.point", format!("needs {} entries, got {}", self.problem.d, p.len())));
            }
        }
        if let Some(g) = self.optimizer.gamma {
            if g.is_nan() || g <= 0.0 {
                return Err(field("optimizer.gamma", "must be positive (inf disables the penalty)"));
            }
        }
        if !(0.0..1.0).contains(&self.optimizer.beta) {
            return Err(field("optimizer.beta", "must lie in [0, 1)"));
        }
        if let Some(s) = &self.schedule {
            let count = [s.theory.is_some(), s.explicit.is_some(), s.epochs.is_some()]
                .iter()
                .filter(|x| **x)
                .count();
            if count != 1 {
                return Err(field("schedule", "give exactly one of theory, explicit or epochs"));
            }
            if let Some(t) = &s.theory {
                require_rho("schedule.theory.rho", t.rho)?;
                if t.stages.is_some() == t.eps_target.is_some() {
                    return Err(field("schedule.theory", "give exactly one of stages or eps_target"));
                }
                if self.method == MethodKind::SgdClassical {
                    return Err(field("schedule.theory", "no theory schedule exists for sgd-classical"));
                }
            }
            if let Some(e) = &s.explicit {
                if let Some(rho) = e.rho {
                    require_rho("schedule.explicit.rho", rho)?;
                }
                if e.stages.is_empty() {
                    return Err(field("schedule.explicit.stages", "needs at least one stage"));
                }
            }
            if let Some(e) = &s.epochs {
                require_rho("schedule.epochs.rho", e.rho)?;
            }
        }
        if let Some(e) = &self.equivalence {
            require_rho("equivalence.rho", e.rho)?;
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<Problem, CliError> {
        let p = &self.problem;
        let mut rng = Rng::new(p.seed, Stream::Data);
        Ok(match p.family {
            Family::Quadratic => Problem::Quadratic(DiagonalQuadraticProblem::make_synthetic(p.n, p.d, &mut rng)?),
            Family::Ridge => Problem::Ridge(RidgeProblem::make_synthetic(p.n, p.d, p.lambda, p.noise, &mut rng)?),
        })
    }

    pub fn start_point(&self, problem: &Problem) -> Result<Vector, CliError> {
        if let Some(p) = &self.start.point {
            return Ok(Vector::from_slice(p)?);
        }
        let x = self.start.distance.unwrap_or(10.0);
        let u = Rng::new(self.start.direction_seed, Stream::Direction).unit_direction(self.problem.d);
        let w = problem.w_star().iter().zip(&u).map(|(w, u)| w + x * u).collect();
        Ok(Vector::new(w)?)
    }

    fn schedule_spec(&self) -> Result<&ScheduleSpec, CliError> {
        self.schedule.as_ref().ok_or_else(|| field("schedule", "missing"))
    }

    pub fn theory_spec(&self) -> Result<&TheorySpec, CliError> {
        self.schedule_spec()?
            .theory
            .as_ref()
            .ok_or_else(|| field("schedule.theory", "this command needs a theory schedule"))
    }

    pub fn theory_inputs(&self, problem: &Problem, w_1: &Vector) -> Result<TheoryInputs, CliError> {
        let t = self.theory_spec()?;
        let mut inputs = TheoryInputs::for_problem(problem.as_dyn(), w_1, t.rho, t.stages.unwrap_or(1))?;
        if let Some(target) = t.eps_target {
            inputs.eps_target = target;
            inputs.stages = None;
            inputs.validate()?;
        }
        Ok(inputs)
    }

    fn penalty(&self, default: Penalty) -> Penalty {
        match self.optimizer.gamma {
            Some(g) if g.is_infinite() => Penalty::None,
            Some(g) => Penalty::Gamma(g),
            None => default,
        }
    }

    /// Method for hand-written schedules.
    fn explicit_method(&self) -> Result<Method, CliError> {
        let o = &self.optimizer;
        Ok(match self.method {
            MethodKind::SgdClassical | MethodKind::Sebs => Method::Sgd {
                penalty: self.penalty(Penalty::None),
            },
            MethodKind::Msebs => Method::Momentum {
                beta: o.beta,
                reset: !o.carry_momentum,
            },
            MethodKind::Adasebs => Method::AdaGrad {
                delta: o.delta.ok_or_else(|| field("optimizer.delta", "required for adasebs"))?,
                nu: o.nu,
            },
        })
    }

    fn default_shape(&self) -> ScheduleShape {
        match self.method {
            MethodKind::SgdClassical => ScheduleShape::Decay,
            _ => ScheduleShape::Enlarge,
        }
    }

    pub fn theory_outputs(&self, inputs: &TheoryInputs) -> Result<TheoryOutputs, CliError> {
        Ok(match self.method {
            MethodKind::Sebs => theorem1_schedule(inputs)?,
            MethodKind::Msebs => msebs_schedule(inputs, self.optimizer.beta)?,
            MethodKind::Adasebs => {
                let delta = self.optimizer.delta.unwrap_or_else(|| adasebs_delta_min(inputs));
                adasebs_schedule(inputs, delta)?
            }
            MethodKind::SgdClassical => unreachable!("rejected during validation"),
        })
    }

    /// The integer schedule to execute, plus the exact ladder when it came
    /// from theory.
    pub fn build_schedule(&self, problem: &Problem, w_1: &Vector) -> Result<(StageSchedule, Option<TheoryOutputs>), CliError> {
        let spec = self.schedule_spec()?;
        let (mut schedule, theory) = if spec.theory.is_some() {
            let inputs = self.theory_inputs(problem, w_1)?;
            let theory = self.theory_outputs(&inputs)?;
            let mut s = theory.to_schedule(spec.rounding)?;
            s.method = match s.method {
                Method::Sgd { penalty } => Method::Sgd {
                    penalty: self.penalty(penalty),
                },
                Method::Momentum { beta, .. } => Method::Momentum {
                    beta,
                    reset: !self.optimizer.carry_momentum,
                },
                Method::AdaGrad { delta, .. } => Method::AdaGrad {
                    delta,
                    nu: self.optimizer.nu,
                },
            };
            (s, Some(theory))
        } else if let Some(e) = &spec.explicit {
            let s = StageSchedule {
                stages: e.stages.clone(),
                method: self.explicit_method()?,
                rho: e.rho.unwrap_or(1.0),
                shape: e.shape.unwrap_or(ScheduleShape::Free),
                return_mode: self.return_mode,
                eps: e.eps.clone(),
                theta: None,
            };
            (s, None)
        } else {
            let e = spec.epochs.as_ref().expect("exactly one schedule spec");
            let plan = EpochPlan {
                n: self.problem.n,
                epochs: e.epochs,
                boundaries: e.boundaries.clone(),
                batch: e.batch,
                eta: e.eta,
                rho: e.rho,
                shape: e.shape.unwrap_or_else(|| self.default_shape()),
            };
            (StageSchedule::from_epochs(self.explicit_method()?, &plan)?, None)
        };
        schedule.return_mode = self.return_mode;
        schedule.validate()?;
        Ok((schedule, theory))
    }

    pub fn output_dir(&self, flag: Option<&std::path::Path>) -> std::path::PathBuf {
        match (flag, &self.output.dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(d)) => d.into(),
            (None, None) => ".".into(),
        }
    }
}
