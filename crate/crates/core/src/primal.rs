//! Primal recovery: agreement-based fixing, exact residual solving and gap
//! certification.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bdd::{Arc, Bdd, MinMarginalPair};
use crate::dual::{DualProblem, DualState};
use crate::error::{BddError, PrimalError};
use crate::instance::{Constraint, IlpInstance, LinearRow};

/// Relative primal-dual gap below which a solution counts as optimal.
pub const CERTIFY_GAP: f64 = 1e-2;

/// Fractions tried in turn when fixing fails; a final exact solve on the
/// untouched instance follows.
pub const FIXING_LADDER: [f64; 4] = [0.9, 0.75, 0.5, 0.25];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub primal_objective: f64,
    pub best_dual: f64,
    pub primal_dual_gap: f64,
    pub certified: bool,
}

impl GapReport {
    /// `(p - d) / p`; when `|p|` is (numerically) zero the absolute gap is
    /// used instead.
    pub fn new(primal_objective: f64, best_dual: f64) -> Self {
        let denom = if primal_objective.abs() > 1e-9 {
            primal_objective.abs()
        } else {
            1.0
        };
        let primal_dual_gap = (primal_objective - best_dual) / denom;
        GapReport {
            primal_objective,
            best_dual,
            primal_dual_gap,
            certified: primal_dual_gap < CERTIFY_GAP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Agreement {
    pub agrees: bool,
    pub score: f64,
    pub preferred: bool,
}

/// Combines the min-marginals a variable has in its subproblems.
///
/// Finite differences must share a strict sign. A subproblem forcing the
/// variable overrides: the variable agrees on the forced value unless some
/// other subproblem strictly prefers the opposite value, and it gets an
/// infinite score so it is fixed first.
pub fn combine_min_marginals(pairs: &[MinMarginalPair]) -> Agreement {
    let mut forced: Option<bool> = None;
    let mut conflict = false;
    let (mut pos, mut neg, mut zero) = (0usize, 0usize, 0usize);
    let mut sum = 0.0;
    for p in pairs {
        match p.difference() {
            Some(m) => {
                sum += m;
                if m > 0.0 {
                    pos += 1;
                } else if m < 0.0 {
                    neg += 1;
                } else {
                    zero += 1;
                }
            }
            None => {
                let f = p.forced().expect("one side is finite");
                if forced.is_some_and(|g| g != f) {
                    conflict = true;
                }
                forced = Some(f);
            }
        }
    }
    if let Some(value) = forced {
        let opposed = if value { pos > 0 } else { neg > 0 };
        return Agreement {
            agrees: !conflict && !opposed,
            score: f64::INFINITY,
            preferred: value,
        };
    }
    let finite = pos + neg + zero;
    Agreement {
        agrees: finite > 0 && (pos == finite || neg == finite),
        score: sum.abs(),
        preferred: sum <= 0.0,
    }
}

/// Per-variable agreement at the current duals. Variables without
/// constraints agree on the value their cost prefers.
pub fn agreement_scores(problem: &DualProblem, state: &DualState) -> Vec<Agreement> {
    let mm = problem.min_marginals(state);
    let costs = problem.instance().costs();
    let mut pairs = Vec::new();
    (0..problem.instance().num_vars())
        .map(|v| {
            if problem.multiplicity(v) == 0 {
                return Agreement {
                    agrees: true,
                    score: f64::INFINITY,
                    preferred: costs[v] < 0.0,
                };
            }
            pairs.clear();
            pairs.extend(problem.incidences(v).map(|(j, l)| mm[j][l]));
            combine_min_marginals(&pairs)
        })
        .collect()
}

/// Values for a subset of variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialAssignment {
    values: Vec<Option<bool>>,
}

impl PartialAssignment {
    pub fn empty(num_vars: usize) -> Self {
        PartialAssignment {
            values: vec![None; num_vars],
        }
    }

    pub fn get(&self, v: usize) -> Option<bool> {
        self.values[v]
    }

    pub fn set(&mut self, v: usize, value: bool) {
        self.values[v] = Some(value);
    }

    pub fn values(&self) -> &[Option<bool>] {
        &self.values
    }

    pub fn num_fixed(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }
}

/// Instance left after conditioning on a partial assignment.
#[derive(Clone, Debug)]
pub struct ReducedInstance {
    pub instance: IlpInstance,
    /// Original identifier of every residual variable.
    pub var_map: Vec<usize>,
    /// Cost contributed by the fixed variables.
    pub fixed_objective: f64,
}

impl ReducedInstance {
    /// Merges a residual solution with the fixed part.
    pub fn lift(&self, fixed: &PartialAssignment, residual: &[bool]) -> Vec<bool> {
        let mut x: Vec<bool> = fixed.values().iter().map(|v| v.unwrap_or(false)).collect();
        for (&orig, &b) in self.var_map.iter().zip(residual) {
            x[orig] = b;
        }
        x
    }
}

/// Conditions every constraint on `fixed`. Constraints that become constant
/// are dropped; an emptied constraint is reported.
pub fn condition(instance: &IlpInstance, fixed: &PartialAssignment) -> Result<ReducedInstance, PrimalError> {
    let n = instance.num_vars();
    let mut new_id = vec![usize::MAX; n];
    let mut var_map = Vec::new();
    for v in 0..n {
        if fixed.get(v).is_none() {
            new_id[v] = var_map.len();
            var_map.push(v);
        }
    }
    let mut constraints = Vec::new();
    for (j, c) in instance.constraints().iter().enumerate() {
        let fixes: Vec<Option<bool>> = c.bdd.variables().iter().map(|&v| fixed.get(v)).collect();
        if fixes.iter().all(Option::is_none) {
            let vars = c.bdd.variables().iter().map(|&v| new_id[v]).collect();
            let bdd = c.bdd.relabel(vars).expect("same arity");
            let row = c.row.as_ref().map(|r| relabel_row(r, fixed, &new_id));
            constraints.push(Constraint { bdd, row });
            continue;
        }
        match c.bdd.restrict(&fixes) {
            Err(BddError::EmptyFeasibleSet) => return Err(PrimalError::InfeasibleAfterFixing { constraint: j }),
            Err(e) => panic!("restricting a valid diagram failed: {e}"),
            Ok(None) => {}
            Ok(Some(bdd)) => {
                let vars = bdd.variables().iter().map(|&v| new_id[v]).collect();
                let bdd = bdd.relabel(vars).expect("same arity");
                let row = c.row.as_ref().map(|r| relabel_row(r, fixed, &new_id));
                constraints.push(Constraint { bdd, row });
            }
        }
    }
    let costs: Vec<f64> = var_map.iter().map(|&v| instance.costs()[v]).collect();
    let fixed_objective = (0..n)
        .filter(|&v| fixed.get(v) == Some(true))
        .map(|v| instance.costs()[v])
        .sum();
    let instance = IlpInstance::new(costs, constraints).expect("relabelled variables are in range");
    Ok(ReducedInstance {
        instance,
        var_map,
        fixed_objective,
    })
}

fn relabel_row(row: &LinearRow, fixed: &PartialAssignment, new_id: &[usize]) -> LinearRow {
    let mut rhs = row.rhs;
    let mut terms = Vec::new();
    for &(v, a) in &row.terms {
        match fixed.get(v) {
            Some(true) => rhs -= a,
            Some(false) => {}
            None => terms.push((new_id[v], a)),
        }
    }
    LinearRow::new(terms, rhs)
}

/// Fixes the top `fraction` of agreeing variables (by score) to their
/// preferred values and conditions the instance on them.
pub fn fix_and_reduce(
    problem: &DualProblem,
    state: &DualState,
    fraction: f64,
) -> Result<(PartialAssignment, ReducedInstance), PrimalError> {
    let scores = agreement_scores(problem, state);
    fix_with_scores(problem.instance(), &scores, fraction)
}

pub fn fix_with_scores(
    instance: &IlpInstance,
    scores: &[Agreement],
    fraction: f64,
) -> Result<(PartialAssignment, ReducedInstance), PrimalError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PrimalError::BadFraction(fraction));
    }
    let mut agreeing: Vec<usize> = (0..scores.len()).filter(|&v| scores[v].agrees).collect();
    // stable: equal scores keep index order
    agreeing.sort_by(|&a, &b| scores[b].score.total_cmp(&scores[a].score));
    let count = ((fraction * agreeing.len() as f64) + 1e-9).floor() as usize;
    let mut fixed = PartialAssignment::empty(instance.num_vars());
    for &v in &agreeing[..count.min(agreeing.len())] {
        fixed.set(v, scores[v].preferred);
    }
    let reduced = condition(instance, &fixed)?;
    Ok((fixed, reduced))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactConfig {
    pub time_limit: Duration,
    /// Averaging iterations run before branching to tighten the bound.
    pub warm_iterations: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            time_limit: Duration::from_secs(60),
            warm_iterations: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExactResult {
    Optimal { x: Vec<bool>, objective: f64 },
    Infeasible,
    TimedOut { incumbent: Option<(Vec<bool>, f64)> },
}

/// Depth-first branch and bound.
///
/// Variables are branched in sweep order, which visits every diagram's
/// layers top-down, so each diagram is always at a single node. The bound is
/// the sum over diagrams of the path cost so far plus the cheapest completion
/// under the dual costs, i.e. the dual bound conditioned on the branch.
pub fn exact_solve(instance: &IlpInstance, cfg: &ExactConfig) -> ExactResult {
    let problem = match DualProblem::new(instance.clone()) {
        Ok(p) => p,
        Err(_) => return ExactResult::Infeasible,
    };
    let mut state = problem.init_duals();
    let mut last = problem.dual_objective(&state);
    for _ in 0..cfg.warm_iterations {
        problem.mma_iteration(&mut state);
        let now = problem.dual_objective(&state);
        if now - last <= 1e-12 * (1.0 + now.abs()) {
            break;
        }
        last = now;
    }
    exact_solve_with_duals(&problem, &state, cfg.time_limit)
}

/// Branch and bound using the given duals for bounding.
pub fn exact_solve_with_duals(problem: &DualProblem, state: &DualState, time_limit: Duration) -> ExactResult {
    let start = Instant::now();
    let instance = problem.instance();
    let bdds: Vec<&Bdd> = instance.constraints().iter().map(|c| &c.bdd).collect();
    let lambda = state.lambda();
    let bwd: Vec<Vec<f64>> = bdds
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let mut d = vec![0.0; b.num_nodes()];
            b.backward_distances(&lambda[problem.slot(j, 0)..problem.slot(j, 0) + b.num_layers()], &mut d);
            d
        })
        .collect();

    let order: Vec<usize> = instance
        .sweep_order()
        .expect("dual problem has an acyclic order")
        .into_iter()
        .filter(|&v| problem.multiplicity(v) > 0)
        .collect();
    let mut x: Vec<bool> = vec![false; instance.num_vars()];
    for &v in problem.free_vars() {
        x[v] = instance.costs()[v] < 0.0;
    }

    // per diagram: current node (global index) or usize::MAX once at TRUE, and path cost
    let mut cur: Vec<usize> = vec![0; bdds.len()];
    let mut acc: Vec<f64> = vec![0.0; bdds.len()];
    let contribution = |j: usize, node: usize, acc: f64| -> f64 {
        if node == usize::MAX {
            acc
        } else {
            acc + bwd[j][node]
        }
    };
    let mut bound: f64 = (0..bdds.len()).map(|j| contribution(j, 0, 0.0)).sum::<f64>() + problem.constant();

    // Evaluates moving variable `v` to `value`: new (node, acc) per incidence,
    // or None if some diagram rejects it.
    let step = |v: usize, value: bool, cur: &[usize], acc: &[f64]| -> Option<(f64, Vec<(usize, usize, f64)>)> {
        let mut delta = 0.0;
        let mut moves = Vec::with_capacity(problem.multiplicity(v));
        for (j, l) in problem.incidences(v) {
            let b = bdds[j];
            let node = cur[j];
            debug_assert!(node != usize::MAX);
            let arc = b.layer(l)[node - b.layer_offset(l)].arc(value);
            let new_acc = acc[j] + if value { lambda[problem.slot(j, l)] } else { 0.0 };
            let new_node = match arc {
                Arc::False => return None,
                Arc::True => usize::MAX,
                Arc::Node(k) => b.layer_offset(l + 1) + k as usize,
            };
            delta += contribution(j, new_node, new_acc) - contribution(j, node, acc[j]);
            moves.push((j, new_node, new_acc));
        }
        Some((delta, moves))
    };

    struct Frame {
        /// values still to try, in order
        pending: Vec<bool>,
        undo: Vec<(usize, usize, f64)>,
        bound_before: f64,
    }

    let mut incumbent: Option<(Vec<bool>, f64)> = None;
    let mut stack: Vec<Frame> = Vec::with_capacity(order.len());
    let mut counter = 0u64;
    let mut depth = 0usize;
    let tol = |inc: f64| 1e-9 * (1.0 + inc.abs());

    // push the root frame
    let mut need_children = true;
    loop {
        counter += 1;
        if counter % 1024 == 0 && start.elapsed() > time_limit {
            return ExactResult::TimedOut { incumbent };
        }
        if need_children {
            if depth == order.len() {
                let value = instance.objective(&x);
                if incumbent.as_ref().is_none_or(|(_, best)| value < *best - tol(*best)) {
                    incumbent = Some((x.clone(), value));
                }
                need_children = false;
                continue;
            }
            let v = order[depth];
            let mut options: Vec<(f64, bool)> = Vec::with_capacity(2);
            for value in [false, true] {
                if let Some((delta, _)) = step(v, value, &cur, &acc) {
                    options.push((bound + delta, value));
                }
            }
            // cheaper child first, ties to 0; the stack pops from the back
            options.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
            stack.push(Frame {
                pending: options.into_iter().map(|(_, b)| b).collect(),
                undo: Vec::new(),
                bound_before: bound,
            });
            need_children = false;
        }
        let level = stack.len().wrapping_sub(1);
        let Some(frame) = stack.last_mut() else { break };
        // undo the previously tried child of this frame
        for &(j, node, a) in frame.undo.iter().rev() {
            cur[j] = node;
            acc[j] = a;
        }
        frame.undo.clear();
        bound = frame.bound_before;
        let v = order[level];
        let Some(value) = frame.pending.pop() else {
            stack.pop();
            if stack.is_empty() {
                break;
            }
            continue;
        };
        let (delta, moves) = step(v, value, &cur, &acc).expect("option was feasible");
        let child_bound = bound + delta;
        if let Some((_, best)) = &incumbent {
            if child_bound >= *best - tol(*best) {
                continue;
            }
        }
        for (j, node, a) in moves {
            frame.undo.push((j, cur[j], acc[j]));
            cur[j] = node;
            acc[j] = a;
        }
        x[v] = value;
        bound = child_bound;
        depth = level + 1;
        need_children = true;
    }
    match incumbent {
        Some((x, objective)) => ExactResult::Optimal { x, objective },
        None => ExactResult::Infeasible,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryConfig {
    pub fraction: f64,
    pub exact: ExactConfig,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            fraction: FIXING_LADDER[0],
            exact: ExactConfig::default(),
        }
    }
}

/// How a primal solution was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RecoveryPath {
    /// Fixing at this fraction plus an exact residual solve.
    Fixed(f64),
    /// Exact solve of the whole instance.
    FullExact,
}

#[derive(Clone, Debug)]
pub struct PrimalOutcome {
    pub assignment: Option<Vec<bool>>,
    pub report: Option<GapReport>,
    pub path: Option<RecoveryPath>,
    /// The residual or full exact solve hit its time limit.
    pub timed_out: bool,
}

/// Fix-and-solve with the fraction ladder, then a full exact solve.
pub fn recover_primal(problem: &DualProblem, state: &DualState, best_dual: f64, cfg: &RecoveryConfig) -> PrimalOutcome {
    let instance = problem.instance();
    let scores = agreement_scores(problem, state);
    let mut ladder: Vec<f64> = vec![cfg.fraction];
    ladder.extend(FIXING_LADDER.iter().copied().filter(|&f| f < cfg.fraction));
    let finish = |x: Vec<bool>, path: RecoveryPath, timed_out: bool| {
        debug_assert!(instance.is_feasible(&x));
        let p = instance.objective(&x);
        PrimalOutcome {
            report: Some(GapReport::new(p, best_dual)),
            assignment: Some(x),
            path: Some(path),
            timed_out,
        }
    };
    for fraction in ladder {
        let Ok((fixed, reduced)) = fix_with_scores(instance, &scores, fraction) else {
            continue;
        };
        let (residual, timed_out) = match exact_solve(&reduced.instance, &cfg.exact) {
            ExactResult::Optimal { x, .. } => (x, false),
            ExactResult::TimedOut { incumbent: Some((x, _)) } => (x, true),
            _ => continue,
        };
        let x = reduced.lift(&fixed, &residual);
        if instance.is_feasible(&x) {
            return finish(x, RecoveryPath::Fixed(fraction), timed_out);
        }
    }
    match exact_solve_with_duals(problem, state, cfg.exact.time_limit) {
        ExactResult::Optimal { x, .. } => finish(x, RecoveryPath::FullExact, false),
        ExactResult::TimedOut { incumbent: Some((x, _)) } => finish(x, RecoveryPath::FullExact, true),
        ExactResult::TimedOut { incumbent: None } => PrimalOutcome {
            assignment: None,
            report: None,
            path: None,
            timed_out: true,
        },
        ExactResult::Infeasible => PrimalOutcome {
            assignment: None,
            report: None,
            path: None,
            timed_out: false,
        },
    }
}
