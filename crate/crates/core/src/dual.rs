//! Lagrangian dual of a diagram decomposition and min-marginal averaging.
//!
//! Every (variable, constraint) incidence owns one dual coordinate. They are
//! stored flat, constraint by constraint in layer order. Dual feasibility
//! means the coordinates of a variable sum to its cost.

use rayon::prelude::*;

use crate::bdd::MinMarginalPair;
use crate::error::InstanceError;
use crate::instance::IlpInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepDirection {
    Forward,
    Backward,
}

/// Static data of the dual: the instance plus index tables.
#[derive(Clone, Debug)]
pub struct DualProblem {
    instance: IlpInstance,
    slot_offsets: Vec<usize>,
    var_slot_start: Vec<usize>,
    var_slots: Vec<(u32, u32)>,
    sweep: Vec<usize>,
    free_vars: Vec<usize>,
    constant: f64,
}

#[derive(Clone, Debug)]
pub struct DualState {
    lambda: Vec<f64>,
    fwd: Vec<Vec<f64>>,
    bwd: Vec<Vec<f64>>,
    lower_bound: f64,
}

impl DualState {
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }
}

impl DualProblem {
    pub fn new(instance: IlpInstance) -> Result<Self, InstanceError> {
        let sweep_all = instance.sweep_order()?;
        let mut slot_offsets = Vec::with_capacity(instance.num_constraints() + 1);
        let mut total = 0;
        for c in instance.constraints() {
            slot_offsets.push(total);
            total += c.bdd.num_layers();
        }
        slot_offsets.push(total);

        let occ = instance.occurrences();
        let mut var_slot_start = Vec::with_capacity(occ.len() + 1);
        let mut var_slots = Vec::with_capacity(total);
        for list in &occ {
            var_slot_start.push(var_slots.len());
            var_slots.extend(list.iter().map(|&(j, l)| (j as u32, l as u32)));
        }
        var_slot_start.push(var_slots.len());

        let free_vars: Vec<usize> = (0..instance.num_vars()).filter(|&v| occ[v].is_empty()).collect();
        let constant = free_vars.iter().map(|&v| instance.costs()[v].min(0.0)).sum();
        let sweep = sweep_all.into_iter().filter(|&v| !occ[v].is_empty()).collect();
        Ok(DualProblem {
            instance,
            slot_offsets,
            var_slot_start,
            var_slots,
            sweep,
            free_vars,
            constant,
        })
    }

    pub fn instance(&self) -> &IlpInstance {
        &self.instance
    }

    /// Number of dual coordinates.
    pub fn dimension(&self) -> usize {
        *self.slot_offsets.last().unwrap()
    }

    /// Flat index of the coordinate of layer `l` in constraint `j`.
    #[inline]
    pub fn slot(&self, j: usize, l: usize) -> usize {
        self.slot_offsets[j] + l
    }

    /// `(constraint, layer)` incidences of variable `v`.
    pub fn incidences(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.var_slots[self.var_slot_start[v]..self.var_slot_start[v + 1]]
            .iter()
            .map(|&(j, l)| (j as usize, l as usize))
    }

    pub fn multiplicity(&self, v: usize) -> usize {
        self.var_slot_start[v + 1] - self.var_slot_start[v]
    }

    /// Variables that appear in no constraint; fixed by the sign of their cost.
    pub fn free_vars(&self) -> &[usize] {
        &self.free_vars
    }

    /// `sum_{free i} min(0, c_i)`, part of every bound.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    fn lambda_of<'a>(&self, lambda: &'a [f64], j: usize) -> &'a [f64] {
        &lambda[self.slot_offsets[j]..self.slot_offsets[j + 1]]
    }

    /// Equal split of every cost over its constraints.
    pub fn init_duals(&self) -> DualState {
        let mut lambda = vec![0.0; self.dimension()];
        for v in 0..self.instance.num_vars() {
            let m = self.multiplicity(v);
            if m == 0 {
                continue;
            }
            let share = self.instance.costs()[v] / m as f64;
            for (j, l) in self.incidences(v) {
                lambda[self.slot(j, l)] = share;
            }
        }
        self.state_from_lambda(lambda)
    }

    /// Builds a state for given duals, which must be feasible.
    pub fn state_from_lambda(&self, lambda: Vec<f64>) -> DualState {
        assert_eq!(lambda.len(), self.dimension());
        let mut state = DualState {
            fwd: self.instance.constraints().iter().map(|c| vec![0.0; c.bdd.num_nodes()]).collect(),
            bwd: self.instance.constraints().iter().map(|c| vec![0.0; c.bdd.num_nodes()]).collect(),
            lambda,
            lower_bound: 0.0,
        };
        self.refresh_backward(&mut state);
        state.lower_bound = self.bound_from_backward(&state);
        state
    }

    /// Replaces the duals and refreshes caches.
    pub fn set_lambda(&self, state: &mut DualState, lambda: &[f64]) {
        state.lambda.copy_from_slice(lambda);
        self.refresh_backward(state);
        state.lower_bound = self.bound_from_backward(state);
    }

    /// Dual objective of the current state.
    pub fn dual_objective(&self, state: &DualState) -> f64 {
        state.lower_bound
    }

    /// Dual objective at arbitrary duals (no caches touched).
    pub fn evaluate(&self, lambda: &[f64]) -> f64 {
        let parts: Vec<f64> = self
            .instance
            .constraints()
            .par_iter()
            .enumerate()
            .map(|(j, c)| c.bdd.min_value(self.lambda_of(lambda, j)))
            .collect();
        parts.iter().sum::<f64>() + self.constant
    }

    fn refresh_backward(&self, state: &mut DualState) {
        let lambda = &state.lambda;
        state
            .bwd
            .par_iter_mut()
            .zip(self.instance.constraints().par_iter())
            .enumerate()
            .for_each(|(j, (bwd, c))| c.bdd.backward_distances(self.lambda_of(lambda, j), bwd));
    }

    fn refresh_forward(&self, state: &mut DualState) {
        let lambda = &state.lambda;
        state
            .fwd
            .par_iter_mut()
            .zip(self.instance.constraints().par_iter())
            .enumerate()
            .for_each(|(j, (fwd, c))| c.bdd.forward_distances(self.lambda_of(lambda, j), fwd));
    }

    fn bound_from_backward(&self, state: &DualState) -> f64 {
        state.bwd.iter().map(|b| b[0]).sum::<f64>() + self.constant
    }

    fn bound_from_forward(&self, state: &DualState) -> f64 {
        let parts = self.instance.constraints().iter().enumerate().map(|(j, c)| {
            let last = self.slot_offsets[j + 1] - 1;
            c.bdd.optimum_from_forward(state.lambda[last], &state.fwd[j])
        });
        parts.sum::<f64>() + self.constant
    }

    /// One sequential averaging sweep over all variables.
    ///
    /// Each diagram sees its layers in order (forward) or reverse order
    /// (backward), so the distances from the opposite side, computed once
    /// at the start, stay exact while the sweep side is updated one layer at
    /// a time.
    pub fn mma_pass(&self, state: &mut DualState, direction: SweepDirection) {
        let bdds = self.instance.constraints();
        let mut pairs: Vec<MinMarginalPair> = Vec::new();
        let mut deltas: Vec<f64> = Vec::new();
        match direction {
            SweepDirection::Forward => {
                self.refresh_backward(state);
                for f in &mut state.fwd {
                    f[0] = 0.0;
                }
            }
            SweepDirection::Backward => self.refresh_forward(state),
        }
        let order: Box<dyn Iterator<Item = &usize>> = match direction {
            SweepDirection::Forward => Box::new(self.sweep.iter()),
            SweepDirection::Backward => Box::new(self.sweep.iter().rev()),
        };
        for &v in order {
            let slots = &self.var_slots[self.var_slot_start[v]..self.var_slot_start[v + 1]];
            pairs.clear();
            for &(j, l) in slots {
                let (j, l) = (j as usize, l as usize);
                let s = self.slot(j, l);
                pairs.push(bdds[j].bdd.layer_min_marginals(l, state.lambda[s], &state.fwd[j], &state.bwd[j]));
            }
            deltas.clear();
            deltas.resize(pairs.len(), 0.0);
            averaging_update(&pairs, &mut deltas);
            for (&(j, l), &delta) in slots.iter().zip(&deltas) {
                let (j, l) = (j as usize, l as usize);
                let s = self.slot(j, l);
                state.lambda[s] += delta;
                let bdd = &bdds[j].bdd;
                match direction {
                    SweepDirection::Forward => {
                        if l + 1 < bdd.num_layers() {
                            bdd.forward_layer(l, state.lambda[s], &mut state.fwd[j]);
                        }
                    }
                    SweepDirection::Backward => bdd.backward_layer(l, state.lambda[s], &mut state.bwd[j]),
                }
            }
        }
        state.lower_bound = match direction {
            SweepDirection::Forward => self.bound_from_forward(state),
            SweepDirection::Backward => self.bound_from_backward(state),
        };
    }

    /// Forward pass followed by a backward pass.
    pub fn mma_iteration(&self, state: &mut DualState) {
        self.mma_pass(state, SweepDirection::Forward);
        self.mma_pass(state, SweepDirection::Backward);
    }

    /// Argmin indicators of every subproblem, flat like the duals.
    pub fn subgradient(&self, state: &DualState) -> Vec<f64> {
        self.subgradient_at(&state.lambda)
    }

    pub fn subgradient_at(&self, lambda: &[f64]) -> Vec<f64> {
        let parts: Vec<Vec<bool>> = self
            .instance
            .constraints()
            .par_iter()
            .enumerate()
            .map(|(j, c)| c.bdd.min_assignment(self.lambda_of(lambda, j)).1)
            .collect();
        parts
            .into_iter()
            .flatten()
            .map(|b| if b { 1.0 } else { 0.0 })
            .collect()
    }

    /// Argmin assignment of every subproblem (indexed by layer).
    pub fn subproblem_argmins(&self, state: &DualState) -> Vec<Vec<bool>> {
        self.instance
            .constraints()
            .par_iter()
            .enumerate()
            .map(|(j, c)| c.bdd.min_assignment(self.lambda_of(&state.lambda, j)).1)
            .collect()
    }

    /// Min-marginals of every layer of every constraint.
    pub fn min_marginals(&self, state: &DualState) -> Vec<Vec<MinMarginalPair>> {
        self.instance
            .constraints()
            .par_iter()
            .enumerate()
            .map(|(j, c)| c.bdd.min_marginals(self.lambda_of(&state.lambda, j)))
            .collect()
    }

    /// Largest relative violation of `sum_j lambda_i^j = c_i`.
    pub fn feasibility_violation(&self, lambda: &[f64]) -> f64 {
        (0..self.instance.num_vars())
            .filter(|&v| self.multiplicity(v) > 0)
            .map(|v| {
                let c = self.instance.costs()[v];
                let sum: f64 = self.incidences(v).map(|(j, l)| lambda[self.slot(j, l)]).sum();
                (sum - c).abs() / (1.0 + c.abs())
            })
            .fold(0.0, f64::max)
    }

    /// If all subproblem argmins agree on shared variables, the induced
    /// assignment (free variables by cost sign).
    pub fn agreeing_assignment(&self, state: &DualState) -> Option<Vec<bool>> {
        let argmins = self.subproblem_argmins(state);
        let mut x: Vec<Option<bool>> = vec![None; self.instance.num_vars()];
        for (c, a) in self.instance.constraints().iter().zip(&argmins) {
            for (&v, &b) in c.bdd.variables().iter().zip(a) {
                match x[v] {
                    Some(prev) if prev != b => return None,
                    _ => x[v] = Some(b),
                }
            }
        }
        Some(
            x.iter()
                .enumerate()
                .map(|(v, b)| b.unwrap_or(self.instance.costs()[v] < 0.0))
                .collect(),
        )
    }
}

/// Dual moves for one variable, given its min-marginals in each subproblem.
///
/// Unforced case: every difference is replaced by the mean difference.
/// When some subproblems force the variable, the others receive the mean of
/// the finite differences clamped to the forced side, and the forcing
/// subproblems absorb the balance in equal parts. Both keep the sum of the
/// moves at zero and cannot lower the dual objective.
pub(crate) fn averaging_update(pairs: &[MinMarginalPair], deltas: &mut [f64]) {
    let n = pairs.len();
    debug_assert_eq!(deltas.len(), n);
    let mut forced_one = 0usize;
    let mut forced_zero = 0usize;
    let mut finite = 0usize;
    let mut sum = 0.0;
    for p in pairs {
        match p.difference() {
            Some(m) => {
                finite += 1;
                sum += m;
            }
            None => match p.forced() {
                Some(true) => forced_one += 1,
                _ => forced_zero += 1,
            },
        }
    }
    deltas.fill(0.0);
    if n <= 1 || finite == 0 || (forced_one > 0 && forced_zero > 0) {
        return;
    }
    let mean = sum / finite as f64;
    let target = if forced_one > 0 {
        mean.min(0.0)
    } else if forced_zero > 0 {
        mean.max(0.0)
    } else {
        mean
    };
    let mut transfer = 0.0;
    for (p, d) in pairs.iter().zip(deltas.iter_mut()) {
        if let Some(m) = p.difference() {
            *d = target - m;
            transfer += m - target;
        }
    }
    let forced = forced_one + forced_zero;
    if forced > 0 {
        let share = transfer / forced as f64;
        for (p, d) in pairs.iter().zip(deltas.iter_mut()) {
            if p.difference().is_none() {
                *d = share;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::LinearRow;

    fn toy() -> IlpInstance {
        IlpInstance::from_rows(
            vec![1.0, 1.0, 1.0],
            vec![
                LinearRow::new(vec![(0, 1), (1, 1)], 1),
                LinearRow::new(vec![(1, 1), (2, 1)], 1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn init_splits_costs_equally() {
        let p = DualProblem::new(toy()).unwrap();
        let s = p.init_duals();
        assert_eq!(s.lambda(), &[1.0, 0.5, 0.5, 1.0]);
        assert_eq!(p.dual_objective(&s), 1.0);
        assert_eq!(p.evaluate(s.lambda()), 1.0);
        assert_eq!(p.feasibility_violation(s.lambda()), 0.0);
    }

    #[test]
    fn toy_stays_optimal_under_mma() {
        let p = DualProblem::new(toy()).unwrap();
        let mut s = p.init_duals();
        p.mma_iteration(&mut s);
        assert_eq!(p.dual_objective(&s), 1.0);
        assert!(p.feasibility_violation(s.lambda()) < 1e-12);
        assert_eq!(p.agreeing_assignment(&s), Some(vec![false, true, false]));
    }

    #[test]
    fn single_constraint_is_fixed_point() {
        let inst = IlpInstance::from_rows(
            vec![3.0, -1.0, 2.0],
            vec![LinearRow::new(vec![(0, 1), (1, 1), (2, 1)], 1)],
        )
        .unwrap();
        let p = DualProblem::new(inst).unwrap();
        let mut s = p.init_duals();
        let before = s.lambda().to_vec();
        p.mma_iteration(&mut s);
        assert_eq!(s.lambda(), &before[..]);
    }

    #[test]
    fn free_variables_enter_the_constant() {
        let inst = IlpInstance::from_rows(vec![1.0, -2.0, 0.5], vec![LinearRow::new(vec![(0, 1)], 1)]).unwrap();
        let p = DualProblem::new(inst).unwrap();
        assert_eq!(p.free_vars(), &[1, 2]);
        let s = p.init_duals();
        assert_eq!(p.dual_objective(&s), 1.0 - 2.0);
    }

    #[test]
    fn subgradient_is_argmin_indicator() {
        let inst = IlpInstance::from_rows(vec![0.0, 0.0], vec![LinearRow::new(vec![(0, 1)], 1), LinearRow::new(vec![(0, 1), (1, 1)], 1)]).unwrap();
        let p = DualProblem::new(inst).unwrap();
        let s = p.init_duals();
        let g = p.subgradient(&s);
        // forced x0 = 1 in the first; zero costs, zero-arc first in the second
        assert_eq!(g, vec![1.0, 0.0, 1.0]);
        assert_eq!(p.subgradient(&s), g);
    }

    #[test]
    fn averaging_rules() {
        let pair = |m0: Option<f64>, m1: Option<f64>| MinMarginalPair { m0, m1 };
        let mut d = vec![0.0; 2];
        averaging_update(&[pair(Some(0.0), Some(3.0)), pair(Some(0.0), Some(1.0))], &mut d);
        assert_eq!(d, vec![-1.0, 1.0]);

        // forced to one, the other prefers zero: clamp to 0 and move the rest
        averaging_update(&[pair(None, Some(0.0)), pair(Some(0.0), Some(4.0))], &mut d);
        assert_eq!(d, vec![4.0, -4.0]);
        // forced to one, the other prefers one already: unchanged
        averaging_update(&[pair(None, Some(0.0)), pair(Some(2.0), Some(0.0))], &mut d);
        assert_eq!(d, vec![0.0, 0.0]);
        // forced to zero, the other prefers one
        averaging_update(&[pair(Some(0.0), None), pair(Some(3.0), Some(0.0))], &mut d);
        assert_eq!(d, vec![-3.0, 3.0]);
        // contradictory forcing: no move
        averaging_update(&[pair(Some(0.0), None), pair(None, Some(0.0))], &mut d);
        assert_eq!(d, vec![0.0, 0.0]);
    }
}
