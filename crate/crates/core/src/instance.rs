//! 0-1 programs `min c^T x` subject to constraints given as diagrams.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::bdd::Bdd;
use crate::error::InstanceError;

/// `sum coeff * x_var = rhs`, terms sorted by variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearRow {
    pub terms: Vec<(usize, i64)>,
    pub rhs: i64,
}

impl LinearRow {
    pub fn new(mut terms: Vec<(usize, i64)>, rhs: i64) -> Self {
        terms.sort_by_key(|&(v, _)| v);
        LinearRow { terms, rhs }
    }

    pub fn evaluate(&self, x: &[bool]) -> i64 {
        self.terms
            .iter()
            .filter(|&&(v, _)| x[v])
            .map(|&(_, a)| a)
            .sum()
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        self.evaluate(x) == self.rhs
    }

    pub fn compile(&self) -> Result<Bdd, crate::BddError> {
        let vars: Vec<usize> = self.terms.iter().map(|&(v, _)| v).collect();
        let coeffs: Vec<i64> = self.terms.iter().map(|&(_, a)| a).collect();
        Bdd::equality(&coeffs, self.rhs, &vars)
    }
}

/// A diagram plus, when the constraint is an ordinary row, that row.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub bdd: Bdd,
    pub row: Option<LinearRow>,
}

impl Constraint {
    pub fn from_row(row: LinearRow) -> Result<Self, crate::BddError> {
        Ok(Constraint {
            bdd: row.compile()?,
            row: Some(row),
        })
    }

    pub fn from_bdd(bdd: Bdd) -> Self {
        Constraint { bdd, row: None }
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        let local: Vec<bool> = self.bdd.variables().iter().map(|&v| x[v]).collect();
        self.bdd.accepts(&local)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IlpInstance {
    costs: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl IlpInstance {
    pub fn new(costs: Vec<f64>, constraints: Vec<Constraint>) -> Result<Self, InstanceError> {
        if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
            return Err(InstanceError::NonFiniteCost(i));
        }
        for (j, c) in constraints.iter().enumerate() {
            if let Some(&v) = c.bdd.variables().iter().find(|&&v| v >= costs.len()) {
                return Err(InstanceError::UnknownVariable {
                    constraint: j,
                    variable: v,
                    num_vars: costs.len(),
                });
            }
        }
        Ok(IlpInstance { costs, constraints })
    }

    /// Compiles each row into a diagram.
    pub fn from_rows(costs: Vec<f64>, rows: Vec<LinearRow>) -> Result<Self, InstanceError> {
        let constraints = rows
            .into_iter()
            .enumerate()
            .map(|(j, row)| {
                Constraint::from_row(row).map_err(|source| InstanceError::Constraint { constraint: j, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        IlpInstance::new(costs, constraints)
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Linear rows, if every constraint still has one.
    pub fn rows(&self) -> Option<Vec<&LinearRow>> {
        self.constraints.iter().map(|c| c.row.as_ref()).collect()
    }

    /// For every variable, the `(constraint, layer)` slots it occupies.
    pub fn occurrences(&self) -> Vec<Vec<(usize, usize)>> {
        let mut occ = vec![Vec::new(); self.num_vars()];
        for (j, c) in self.constraints.iter().enumerate() {
            for (l, &v) in c.bdd.variables().iter().enumerate() {
                occ[v].push((j, l));
            }
        }
        occ
    }

    /// A total order of the variables that respects the layer order of every
    /// diagram. Ties go to the smallest identifier, so an instance whose
    /// diagrams list variables in ascending order gets `0, 1, 2, ...`.
    pub fn sweep_order(&self) -> Result<Vec<usize>, InstanceError> {
        let n = self.num_vars();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for c in &self.constraints {
            for w in c.bdd.variables().windows(2) {
                succ[w[0]].push(w[1]);
                indeg[w[1]] += 1;
            }
        }
        let mut heap: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = heap.pop() {
            order.push(v);
            for &w in &succ[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    heap.push(Reverse(w));
                }
            }
        }
        if order.len() != n {
            return Err(InstanceError::CyclicOrder);
        }
        Ok(order)
    }

    pub fn objective(&self, x: &[bool]) -> f64 {
        self.costs.iter().zip(x).filter(|(_, &b)| b).map(|(c, _)| c).sum()
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        x.len() == self.num_vars() && self.constraints.iter().all(|c| c.is_satisfied(x))
    }

    /// Indices of constraints violated by `x`.
    pub fn violated(&self, x: &[bool]) -> Vec<usize> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_satisfied(x))
            .map(|(j, _)| j)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy() -> IlpInstance {
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
    fn toy_structure() {
        let inst = toy();
        assert_eq!(inst.occurrences()[1], vec![(0, 1), (1, 0)]);
        assert_eq!(inst.sweep_order().unwrap(), vec![0, 1, 2]);
        assert!(inst.is_feasible(&[false, true, false]));
        assert_eq!(inst.violated(&[true, true, false]), vec![0]);
        assert_eq!(inst.violated(&[false, false, false]), vec![0, 1]);
        assert_eq!(inst.objective(&[true, false, true]), 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        let r = IlpInstance::from_rows(vec![1.0], vec![LinearRow::new(vec![(1, 1)], 1)]);
        assert!(matches!(r, Err(InstanceError::UnknownVariable { variable: 1, .. })));
        let r = IlpInstance::from_rows(vec![f64::NAN], vec![]);
        assert!(matches!(r, Err(InstanceError::NonFiniteCost(0))));
        let r = IlpInstance::from_rows(vec![0.0, 0.0], vec![LinearRow::new(vec![(0, 1), (1, 1)], 3)]);
        assert!(matches!(r, Err(InstanceError::Constraint { constraint: 0, .. })));
    }

    #[test]
    fn sweep_order_follows_layers() {
        // second diagram visits 3 before 1
        let a = Bdd::equality(&[1, 1], 1, &[0, 3]).unwrap();
        let b = Bdd::equality(&[1, 1], 1, &[3, 1]).unwrap();
        let inst = IlpInstance::new(vec![0.0; 4], vec![Constraint::from_bdd(a), Constraint::from_bdd(b)]).unwrap();
        assert_eq!(inst.sweep_order().unwrap(), vec![0, 2, 3, 1]);
        let c = Bdd::equality(&[1, 1], 1, &[1, 0]).unwrap();
        let cyc = IlpInstance::new(
            vec![0.0; 4],
            vec![
                Constraint::from_bdd(Bdd::equality(&[1, 1], 1, &[0, 1]).unwrap()),
                Constraint::from_bdd(c),
            ],
        )
        .unwrap();
        assert_eq!(cyc.sweep_order(), Err(InstanceError::CyclicOrder));
    }
}
