//! Quasi-Newton steps interleaved with min-marginal averaging.
//!
//! The dual objective is concave and maximised. The history stores
//! `s = lambda_{k+1} - lambda_k` and `y = g_k - g_{k+1}`, the difference of
//! the negated supergradients, so the usual two-loop recursion for
//! minimising `-E` applies unchanged and `H g` is an ascent direction.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dual::{DualProblem, DualState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// Minimal `s^T y` for a pair to be stored.
    pub epsilon: f64,
    /// Step growth factor, > 1.
    pub grow: f64,
    /// Step shrink factor, in (0, 1).
    pub shrink: f64,
    /// Maximal number of step-size trials.
    pub max_trials: usize,
    pub initial_step: f64,
    /// History size.
    pub memory: usize,
    /// `delta_min = sufficient_ascent * (E(lambda^1) - E(lambda^0))`.
    pub sufficient_ascent: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            epsilon: 1e-8,
            grow: 1.1,
            shrink: 0.8,
            max_trials: 5,
            initial_step: 1.0,
            memory: 10,
            sufficient_ascent: 1e-6,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(format!("shrink factor {} not in (0, 1)", self.shrink));
        }
        if self.grow <= 1.0 {
            return Err(format!("growth factor {} not above 1", self.grow));
        }
        if self.max_trials == 0 || self.memory == 0 {
            return Err("max_trials and memory must be positive".into());
        }
        if self.epsilon <= 0.0 || self.initial_step <= 0.0 {
            return Err("epsilon and initial step must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("L-BFGS history is empty")]
pub struct EmptyHistory;

/// Stored curvature pairs, newest first.
#[derive(Clone, Debug, Default)]
pub struct LbfgsHistory {
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    rho: VecDeque<f64>,
    memory: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LbfgsHistory {
    pub fn new(memory: usize) -> Self {
        LbfgsHistory {
            memory,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.s.iter().map(Vec::as_slice).zip(self.y.iter().map(Vec::as_slice))
    }

    /// Stores `(s, y)` in front if `s^T y >= epsilon`; evicts the oldest pair
    /// beyond `memory`. Returns whether the pair was stored.
    pub fn update(&mut self, s: Vec<f64>, y: Vec<f64>, cfg: &StepConfig) -> bool {
        assert_eq!(s.len(), y.len());
        let sy = dot(&s, &y);
        if !(sy >= cfg.epsilon) {
            return false;
        }
        self.s.push_front(s);
        self.y.push_front(y);
        self.rho.push_front(1.0 / sy);
        while self.s.len() > self.memory {
            self.s.pop_back();
            self.y.pop_back();
            self.rho.pop_back();
        }
        true
    }

    /// Two-loop recursion: `H g` with initial scaling `s_k^T y_k / y_k^T y_k`
    /// taken from the newest pair.
    pub fn direction(&self, g: &[f64]) -> Result<Vec<f64>, EmptyHistory> {
        if self.is_empty() {
            return Err(EmptyHistory);
        }
        let mut q = g.to_vec();
        let mut alpha = vec![0.0; self.len()];
        for (i, ((s, y), &rho)) in self.s.iter().zip(&self.y).zip(&self.rho).enumerate() {
            let a = rho * dot(s, &q);
            alpha[i] = a;
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
        }
        let (s0, y0) = (&self.s[0], &self.y[0]);
        let scale = dot(s0, y0) / dot(y0, y0);
        for qi in &mut q {
            *qi *= scale;
        }
        for i in (0..self.len()).rev() {
            let (s, y, rho) = (&self.s[i], &self.y[i], self.rho[i]);
            let beta = rho * dot(y, &q);
            let coef = alpha[i] - beta;
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += coef * si;
            }
        }
        Ok(q)
    }
}

/// Removes the per-variable mean so that `sum_j d_i^j = 0` for every
/// variable; moving along the result keeps the duals feasible.
pub fn project_direction(problem: &DualProblem, d_hat: &[f64]) -> Vec<f64> {
    assert_eq!(d_hat.len(), problem.dimension());
    let mut d = d_hat.to_vec();
    for v in 0..problem.instance().num_vars() {
        let m = problem.multiplicity(v);
        if m == 0 {
            continue;
        }
        let mean = problem.incidences(v).map(|(j, l)| d_hat[problem.slot(j, l)]).sum::<f64>() / m as f64;
        for (j, l) in problem.incidences(v) {
            d[problem.slot(j, l)] -= mean;
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// Best trial step.
    pub gamma: f64,
    /// Objective at the best trial step.
    pub value: f64,
    /// Whether the best trial beats `current`.
    pub improved: bool,
    pub evaluations: usize,
}

/// Step-size search along a feasible direction.
///
/// `objective(gamma)` evaluates `E(lambda + gamma d)`; `current` is
/// `E(lambda)`. Improvement inside the loop is measured against the value at
/// the previous step size, shrinking on no improvement and growing on
/// improvement below `delta_min`.
pub fn find_step_size(
    mut objective: impl FnMut(f64) -> f64,
    current: f64,
    gamma_prev: f64,
    delta_min: f64,
    cfg: &StepConfig,
) -> StepOutcome {
    let mut gamma = gamma_prev;
    let mut best_gamma = gamma;
    let e_init = objective(gamma);
    let mut best_value = e_init;
    let mut value = e_init;
    let mut evaluations = 1;
    for _ in 0..cfg.max_trials {
        if value <= e_init {
            gamma *= cfg.shrink;
        } else {
            gamma *= cfg.grow;
        }
        value = objective(gamma);
        evaluations += 1;
        if value >= best_value {
            best_gamma = gamma;
            best_value = value;
        }
        if value - e_init >= delta_min {
            break;
        }
    }
    StepOutcome {
        gamma: best_gamma,
        value: best_value,
        improved: best_value > current,
        evaluations,
    }
}

/// Quasi-Newton bookkeeping carried across iterations.
#[derive(Clone, Debug)]
pub struct QuasiNewton {
    pub history: LbfgsHistory,
    pub gamma: f64,
    /// Frozen after the first iteration.
    pub delta_min: Option<f64>,
    initial_objective: f64,
    last_subgradient: Option<Vec<f64>>,
}

impl QuasiNewton {
    pub fn new(problem: &DualProblem, state: &DualState, cfg: &StepConfig) -> Self {
        QuasiNewton {
            history: LbfgsHistory::new(cfg.memory),
            gamma: cfg.initial_step,
            delta_min: None,
            initial_objective: problem.dual_objective(state),
            last_subgradient: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationReport {
    /// A quasi-Newton step was applied before averaging.
    pub qn_step: bool,
    pub stored_pair: bool,
    pub gamma: f64,
    pub objective: f64,
}

/// One hybrid iteration: supergradient, `H g`, projection, step search,
/// dual step, averaging, history update.
pub fn solver_iteration(problem: &DualProblem, state: &mut DualState, qn: &mut QuasiNewton, cfg: &StepConfig) -> IterationReport {
    let g = match qn.last_subgradient.take() {
        Some(g) => g,
        None => problem.subgradient(state),
    };
    let start = state.lambda().to_vec();
    let mut qn_step = false;
    if let Ok(d_hat) = qn.history.direction(&g) {
        let d = project_direction(problem, &d_hat);
        let current = problem.dual_objective(state);
        let delta_min = qn.delta_min.unwrap_or(0.0);
        let mut trial = vec![0.0; start.len()];
        let outcome = find_step_size(
            |gamma| {
                for ((t, &l), &di) in trial.iter_mut().zip(&start).zip(&d) {
                    *t = l + gamma * di;
                }
                problem.evaluate(&trial)
            },
            current,
            qn.gamma,
            delta_min,
            cfg,
        );
        qn.gamma = outcome.gamma;
        if outcome.improved {
            for ((t, &l), &di) in trial.iter_mut().zip(&start).zip(&d) {
                *t = l + outcome.gamma * di;
            }
            problem.set_lambda(state, &trial);
            qn_step = true;
        }
    }
    problem.mma_iteration(state);
    let g_new = problem.subgradient(state);
    let s: Vec<f64> = state.lambda().iter().zip(&start).map(|(a, b)| a - b).collect();
    let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
    let stored_pair = qn.history.update(s, y, cfg);
    let objective = problem.dual_objective(state);
    if qn.delta_min.is_none() {
        qn.delta_min = Some((cfg.sufficient_ascent * (objective - qn.initial_objective)).max(0.0));
    }
    qn.last_subgradient = Some(g_new);
    IterationReport {
        qn_step,
        stored_pair,
        gamma: qn.gamma,
        objective,
    }
}
