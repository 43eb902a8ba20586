//! End-to-end solve: split, dual ascent, primal recovery.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dual::{DualProblem, DualState};
use crate::error::{InstanceError, MeshError, ProductError, SplitError};
use crate::instance::IlpInstance;
use crate::lbfgs::{solver_iteration, QuasiNewton, StepConfig};
use crate::primal::{recover_primal, ExactConfig, GapReport, RecoveryConfig, RecoveryPath};
use crate::split::{apply_plan, plan_chunks, SplitInstance, DEFAULT_CHUNK_SIZE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    MmaOnly,
    Hybrid,
}

impl std::str::FromStr for SolveMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mma-only" | "mma" => Ok(SolveMode::MmaOnly),
            "hybrid" => Ok(SolveMode::Hybrid),
            other => Err(format!("unknown mode '{other}' (expected mma-only or hybrid)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub mode: SolveMode,
    /// Maximal original variables per diagram; 0 disables splitting.
    pub chunk_size: usize,
    pub step: StepConfig,
    pub max_iterations: usize,
    pub max_seconds: f64,
    /// Stop once the relative per-iteration improvement stays below this
    /// for `patience` consecutive iterations.
    pub dual_tolerance: f64,
    pub patience: usize,
    pub fixing_fraction: f64,
    pub ring: usize,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub seed: u64,
    pub exact_time_limit: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            mode: SolveMode::Hybrid,
            chunk_size: DEFAULT_CHUNK_SIZE,
            step: StepConfig::default(),
            max_iterations: 500,
            max_seconds: 600.0,
            dual_tolerance: 1e-7,
            patience: 5,
            fixing_fraction: 0.9,
            ring: 2,
            threads: 0,
            seed: 0,
            exact_time_limit: 60.0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.step.validate()?;
        if self.chunk_size == 1 {
            return Err("chunk size must be 0 (off) or at least 2".into());
        }
        if !(self.fixing_fraction > 0.0 && self.fixing_fraction <= 1.0) {
            return Err(format!("fixing fraction {} not in (0, 1]", self.fixing_fraction));
        }
        if self.ring == 0 {
            return Err("ring must be positive".into());
        }
        if !(self.max_seconds > 0.0) || !(self.exact_time_limit > 0.0) {
            return Err("time limits must be positive".into());
        }
        if self.dual_tolerance < 0.0 {
            return Err("dual tolerance must be non-negative".into());
        }
        Ok(())
    }

    pub fn recovery(&self) -> RecoveryConfig {
        RecoveryConfig {
            fraction: self.fixing_fraction,
            exact: ExactConfig {
                time_limit: Duration::from_secs_f64(self.exact_time_limit),
                ..ExactConfig::default()
            },
        }
    }

    /// Runs `f` on a pool with the configured thread count.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match rayon::ThreadPoolBuilder::new().num_threads(self.threads).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationKind {
    Init,
    /// Averaging only.
    Mma,
    /// An accepted quasi-Newton step followed by averaging.
    LbfgsMma,
    /// Final row carrying the primal result.
    Primal,
}

impl IterationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IterationKind::Init => "init",
            IterationKind::Mma => "mma",
            IterationKind::LbfgsMma => "lbfgs+mma",
            IterationKind::Primal => "primal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub time_s: f64,
    pub iteration: usize,
    pub kind: IterationKind,
    pub dual_objective: f64,
    pub relative_dual_gap: Option<f64>,
    pub primal_objective: Option<f64>,
    pub primal_dual_gap: Option<f64>,
}

/// `(d* - d) / |d*|`, absolute when `d*` is zero.
pub fn relative_dual_gap(best: f64, value: f64) -> f64 {
    let denom = if best.abs() > 1e-12 { best.abs() } else { 1.0 };
    ((best - value) / denom).max(0.0)
}

/// Fills the relative gap column against `best`.
pub fn finalize_log(rows: &mut [LogRow], best: f64) {
    for r in rows {
        r.relative_dual_gap = Some(relative_dual_gap(best, r.dual_objective));
    }
}

#[derive(Clone, Debug)]
pub struct DualRun {
    pub state: DualState,
    pub iterations: usize,
    pub log: Vec<LogRow>,
    pub best_dual: f64,
    pub qn_steps: usize,
    pub elapsed: Duration,
}

/// Dual ascent until the iteration/time budget or stagnation.
pub fn solve_dual(problem: &DualProblem, cfg: &SolveConfig) -> DualRun {
    let start = Instant::now();
    let mut state = problem.init_duals();
    let mut log = vec![LogRow {
        time_s: 0.0,
        iteration: 0,
        kind: IterationKind::Init,
        dual_objective: problem.dual_objective(&state),
        relative_dual_gap: None,
        primal_objective: None,
        primal_dual_gap: None,
    }];
    let mut qn = QuasiNewton::new(problem, &state, &cfg.step);
    let mut prev = problem.dual_objective(&state);
    let mut stalled = 0;
    let mut qn_steps = 0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        if start.elapsed().as_secs_f64() > cfg.max_seconds {
            break;
        }
        iterations += 1;
        let kind = match cfg.mode {
            SolveMode::MmaOnly => {
                problem.mma_iteration(&mut state);
                IterationKind::Mma
            }
            SolveMode::Hybrid => {
                let r = solver_iteration(problem, &mut state, &mut qn, &cfg.step);
                if r.qn_step {
                    qn_steps += 1;
                    IterationKind::LbfgsMma
                } else {
                    IterationKind::Mma
                }
            }
        };
        let value = problem.dual_objective(&state);
        log.push(LogRow {
            time_s: start.elapsed().as_secs_f64(),
            iteration: iterations,
            kind,
            dual_objective: value,
            relative_dual_gap: None,
            primal_objective: None,
            primal_dual_gap: None,
        });
        if value - prev < cfg.dual_tolerance * value.abs().max(1.0) {
            stalled += 1;
            if stalled >= cfg.patience.max(1) {
                break;
            }
        } else {
            stalled = 0;
        }
        prev = value;
    }
    let best_dual = log.iter().map(|r| r.dual_objective).fold(f64::NEG_INFINITY, f64::max);
    DualRun {
        state,
        iterations,
        log,
        best_dual,
        qn_steps,
        elapsed: start.elapsed(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Product(#[from] ProductError),
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// Solution over the original variables.
    pub assignment: Option<Vec<bool>>,
    pub report: Option<GapReport>,
    pub best_dual: f64,
    pub iterations: usize,
    pub qn_steps: usize,
    pub log: Vec<LogRow>,
    pub path: Option<RecoveryPath>,
    pub timed_out: bool,
    pub num_aux: usize,
    pub dual_seconds: f64,
}

impl SolveOutcome {
    pub fn is_certified(&self) -> bool {
        self.report.is_some_and(|r| r.certified)
    }
}

pub fn split_instance(instance: &IlpInstance, chunk_size: usize) -> Result<SplitInstance, SplitError> {
    if chunk_size == 0 {
        return Ok(SplitInstance::unsplit(instance.clone()));
    }
    let plan = plan_chunks(instance, chunk_size);
    if plan.constraints.is_empty() {
        return Ok(SplitInstance::unsplit(instance.clone()));
    }
    apply_plan(instance, &plan)
}

/// Splits, runs the dual, recovers and certifies a primal solution.
pub fn solve(instance: &IlpInstance, cfg: &SolveConfig) -> Result<SolveOutcome, SolveError> {
    cfg.validate().map_err(SolveError::Config)?;
    cfg.install(|| {
        let split = split_instance(instance, cfg.chunk_size)?;
        let problem = DualProblem::new(split.instance.clone())?;
        let run = solve_dual(&problem, cfg);
        let primal = recover_primal(&problem, &run.state, run.best_dual, &cfg.recovery());
        let mut log = run.log;
        finalize_log(&mut log, run.best_dual);
        let assignment = primal.assignment.map(|x| split.project(&x));
        if let (Some(x), Some(report)) = (&assignment, &primal.report) {
            debug_assert!(instance.is_feasible(x));
            log.push(LogRow {
                time_s: log.last().map_or(0.0, |r| r.time_s),
                iteration: run.iterations,
                kind: IterationKind::Primal,
                dual_objective: run.best_dual,
                relative_dual_gap: Some(0.0),
                primal_objective: Some(instance.objective(x)),
                primal_dual_gap: Some(report.primal_dual_gap),
            });
        }
        Ok(SolveOutcome {
            assignment,
            report: primal.report,
            best_dual: run.best_dual,
            iterations: run.iterations,
            qn_steps: run.qn_steps,
            log,
            path: primal.path,
            timed_out: primal.timed_out,
            num_aux: split.instance.num_vars() - split.num_original,
            dual_seconds: run.elapsed.as_secs_f64(),
        })
    })
}
