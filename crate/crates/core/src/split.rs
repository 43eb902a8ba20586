//! Cutting long diagrams into chains of shorter ones.
//!
//! Splitting after layer `i` introduces one auxiliary variable per node of
//! layer `i` (0-based, i.e. the node set of the `(i+1)`-th variable). The left
//! part ends with a one-hot block over the auxiliaries naming the node the
//! prefix path reached; the right part reads that block and continues from
//! the named node. Every accepted assignment of the original diagram extends
//! to exactly one joint assignment of the pair.

use crate::bdd::{Arc, Bdd, Node};
use crate::error::{InstanceError, SplitError};
use crate::instance::{Constraint, IlpInstance};

/// Default maximal number of original variables per chunk.
pub const DEFAULT_CHUNK_SIZE: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult {
    pub left: Bdd,
    pub right: Bdd,
    pub aux_ids: Vec<usize>,
}

/// Splits `bdd` into a left part over the first `split_after_layer`
/// variables and a right part over the rest, coupled by fresh auxiliaries
/// drawn from `next_id`.
pub fn split_bdd(bdd: &Bdd, split_after_layer: usize, next_id: &mut usize) -> Result<SplitResult, SplitError> {
    let n = bdd.num_layers();
    if split_after_layer == 0 || split_after_layer >= n {
        return Err(SplitError::SplitAtTerminalLayer {
            index: split_after_layer,
            layers: n,
        });
    }
    let cut = split_after_layer;
    let k = bdd.layer(cut).len();
    let aux_ids: Vec<usize> = (0..k).map(|t| *next_id + t).collect();
    *next_id += k;

    // Left: prefix, then aux layer t holds "pending j" (j >= t) and, from
    // t = 1 on, a "done" node.
    let pending = |t: usize, j: usize| Arc::Node((j - t) as u32);
    let done = |t: usize| Arc::Node((k - t) as u32);
    let mut left: Vec<Vec<Node>> = (0..cut).map(|l| bdd.layer(l).to_vec()).collect();
    // arcs into layer `cut` now enter the one-hot block at its first layer
    // with the same local index, so the last prefix layer needs no rewrite
    for t in 0..k {
        let last = t + 1 == k;
        let mut layer = Vec::with_capacity(k - t + 1);
        for j in t..k {
            let node = if j == t {
                Node::new(Arc::False, if last { Arc::True } else { done(t + 1) })
            } else {
                Node::new(pending(t + 1, j), Arc::False)
            };
            layer.push(node);
        }
        if t > 0 {
            layer.push(Node::new(if last { Arc::True } else { done(t + 1) }, Arc::False));
        }
        left.push(layer);
    }
    let mut left_vars = bdd.variables()[..cut].to_vec();
    left_vars.extend(&aux_ids);

    // Right: aux layer t holds "none yet" (index 0) and "selected j" for
    // j < t (index 1 + j); the last aux layer jumps into the original node.
    let mut right: Vec<Vec<Node>> = Vec::with_capacity(k + n - cut);
    for t in 0..k {
        let last = t + 1 == k;
        let mut layer = Vec::with_capacity(t + 1);
        let none = if last {
            Node::new(Arc::False, Arc::Node(t as u32))
        } else {
            Node::new(Arc::Node(0), Arc::Node((1 + t) as u32))
        };
        layer.push(none);
        for j in 0..t {
            let keep = if last { Arc::Node(j as u32) } else { Arc::Node((1 + j) as u32) };
            layer.push(Node::new(keep, Arc::False));
        }
        right.push(layer);
    }
    right.extend((cut..n).map(|l| bdd.layer(l).to_vec()));
    let mut right_vars = aux_ids.clone();
    right_vars.extend(&bdd.variables()[cut..]);

    Ok(SplitResult {
        left: Bdd::from_layers(left_vars, left)?,
        right: Bdd::from_layers(right_vars, right)?,
        aux_ids,
    })
}

/// Cut positions (in original layer indices) for one constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintCuts {
    pub constraint: usize,
    pub cuts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub chunk_size: usize,
    pub constraints: Vec<ConstraintCuts>,
}

/// Schedules cuts every `chunk_size` layers on constraints longer than
/// `chunk_size`.
pub fn plan_chunks(instance: &IlpInstance, chunk_size: usize) -> SplitPlan {
    assert!(chunk_size >= 2, "chunk size must be at least 2");
    let constraints = instance
        .constraints()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.bdd.num_layers() > chunk_size)
        .map(|(j, c)| ConstraintCuts {
            constraint: j,
            cuts: (1..).map(|m| m * chunk_size).take_while(|&p| p < c.bdd.num_layers()).collect(),
        })
        .collect();
    SplitPlan {
        chunk_size,
        constraints,
    }
}

/// Instance after splitting, with auxiliaries appended after the original
/// variables at zero cost.
#[derive(Clone, Debug)]
pub struct SplitInstance {
    pub instance: IlpInstance,
    pub num_original: usize,
    /// Original constraint index of every constraint of `instance`.
    pub origin: Vec<usize>,
}

impl SplitInstance {
    /// Wraps an instance without any splits.
    pub fn unsplit(instance: IlpInstance) -> Self {
        let num_original = instance.num_vars();
        let origin = (0..instance.num_constraints()).collect();
        SplitInstance {
            instance,
            num_original,
            origin,
        }
    }

    /// Restricts a joint assignment to the original variables.
    pub fn project<T: Copy>(&self, x: &[T]) -> Vec<T> {
        x[..self.num_original].to_vec()
    }
}

/// Applies a plan. Cuts of one constraint are applied right to left, so each
/// split acts on a left part whose prefix still has the original layering.
pub fn apply_plan(instance: &IlpInstance, plan: &SplitPlan) -> Result<SplitInstance, SplitError> {
    let num_original = instance.num_vars();
    let mut next_id = num_original;
    let mut constraints = Vec::with_capacity(instance.num_constraints());
    let mut origin = Vec::with_capacity(instance.num_constraints());
    let mut plan_iter = plan.constraints.iter().peekable();
    for (j, c) in instance.constraints().iter().enumerate() {
        let cuts = match plan_iter.peek() {
            Some(cc) if cc.constraint == j => &plan_iter.next().unwrap().cuts,
            _ => {
                constraints.push(c.clone());
                origin.push(j);
                continue;
            }
        };
        let mut pieces: Vec<Bdd> = Vec::with_capacity(cuts.len() + 1);
        let mut current = c.bdd.clone();
        for &cut in cuts.iter().rev() {
            let res = split_bdd(&current, cut, &mut next_id)?;
            pieces.push(res.right);
            current = res.left;
        }
        pieces.push(current);
        pieces.reverse();
        for piece in pieces {
            constraints.push(Constraint::from_bdd(piece));
            origin.push(j);
        }
    }
    let mut costs = instance.costs().to_vec();
    costs.resize(next_id, 0.0);
    let instance = IlpInstance::new(costs, constraints).map_err(|e| match e {
        InstanceError::Constraint { source, .. } => SplitError::Bdd(source),
        other => SplitError::Bdd(crate::BddError::Malformed(other.to_string())),
    })?;
    Ok(SplitInstance {
        instance,
        num_original,
        origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::LinearRow;

    fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0u64..(1 << n)).map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
    }

    #[test]
    fn cardinality_split_after_four() {
        let vars: Vec<usize> = (0..8).collect();
        let bdd = Bdd::equality(&[1; 8], 2, &vars).unwrap();
        let mut next = 8;
        let res = split_bdd(&bdd, 4, &mut next).unwrap();
        assert_eq!(res.aux_ids, vec![8, 9, 10]);
        assert_eq!(next, 11);
        assert_eq!(res.left.variables(), &[0, 1, 2, 3, 8, 9, 10]);
        assert_eq!(res.right.variables(), &[8, 9, 10, 4, 5, 6, 7]);

        // enumerate the joint system over (x, y) and project to x
        let mut projected = 0u32;
        for x in assignments(8) {
            let mut hits = 0;
            for y in assignments(3) {
                let left: Vec<bool> = x[..4].iter().chain(&y).copied().collect();
                let right: Vec<bool> = y.iter().chain(&x[4..]).copied().collect();
                if res.left.accepts(&left) && res.right.accepts(&right) {
                    assert_eq!(y.iter().filter(|&&b| b).count(), 1, "one-hot");
                    hits += 1;
                }
            }
            assert!(hits <= 1, "auxiliary assignment is unique");
            assert_eq!(hits == 1, bdd.accepts(&x));
            projected += hits;
        }
        assert_eq!(projected, 28);
    }

    #[test]
    fn split_bounds() {
        let bdd = Bdd::equality(&[1; 8], 2, &(0..8).collect::<Vec<_>>()).unwrap();
        let mut next = 8;
        assert_eq!(
            split_bdd(&bdd, 8, &mut next),
            Err(SplitError::SplitAtTerminalLayer { index: 8, layers: 8 })
        );
        assert!(split_bdd(&bdd, 0, &mut next).is_err());
        assert_eq!(next, 8);
    }

    #[test]
    fn plan_examples() {
        let long = LinearRow::new((0..300).map(|v| (v, 1)).collect(), 1);
        let short = LinearRow::new((0..20).map(|v| (v, 1)).collect(), 1);
        let inst = IlpInstance::from_rows(vec![1.0; 300], vec![long, short]).unwrap();
        let plan = plan_chunks(&inst, 128);
        assert_eq!(
            plan.constraints,
            vec![ConstraintCuts {
                constraint: 0,
                cuts: vec![128, 256]
            }]
        );
        let split = apply_plan(&inst, &plan).unwrap();
        assert_eq!(split.origin, vec![0, 0, 0, 1]);
        assert_eq!(split.num_original, 300);
        // Σx = 1 has two nodes per inner layer: two auxiliaries per cut
        assert_eq!(split.instance.num_vars(), 304);
        for c in &split.instance.constraints()[..3] {
            let originals = c.bdd.variables().iter().filter(|&&v| v < 300).count();
            assert!(originals <= 128);
        }
        assert!(split.instance.costs()[300..].iter().all(|&c| c == 0.0));
        split.instance.sweep_order().unwrap();

        let plan = plan_chunks(&inst, 400);
        assert!(plan.constraints.is_empty());
    }
}
