//! Layered, reduced binary decision diagrams for single 0-1 constraints.
//!
//! Every variable of a constraint owns exactly one layer; arcs lead from a
//! layer to the next one or to a terminal, and only the last layer may point
//! at the true terminal. No skip arcs are allowed, so every root-to-TRUE path
//! assigns every variable of the constraint.
//!
//! All diagrams handed out by this module are reduced (no two nodes of a layer
//! share both successors) and trimmed (every node is reachable from the root
//! and can reach TRUE). The shortest-path routines below rely on that: a node
//! always has at least one live outgoing arc.

use std::collections::{BTreeMap, HashMap};

use crate::error::BddError;

/// Target of an outgoing arc. `Node` holds an index into the next layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arc {
    False,
    True,
    Node(u32),
}

impl Arc {
    pub fn is_false(self) -> bool {
        matches!(self, Arc::False)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub lo: Arc,
    pub hi: Arc,
}

impl Node {
    pub fn new(lo: Arc, hi: Arc) -> Self {
        Node { lo, hi }
    }

    #[inline]
    pub fn arc(&self, value: bool) -> Arc {
        if value {
            self.hi
        } else {
            self.lo
        }
    }
}

/// Least cost with a variable forced to 0 (`m0`) or 1 (`m1`).
///
/// `None` marks a branch without any accepting path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinMarginalPair {
    pub m0: Option<f64>,
    pub m1: Option<f64>,
}

impl MinMarginalPair {
    /// `m1 - m0`, or `None` when one side is infeasible.
    pub fn difference(&self) -> Option<f64> {
        match (self.m0, self.m1) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    }

    /// Value the variable is forced to, if one branch is infeasible.
    pub fn forced(&self) -> Option<bool> {
        match (self.m0, self.m1) {
            (None, Some(_)) => Some(true),
            (Some(_), None) => Some(false),
            _ => None,
        }
    }

    pub fn min(&self) -> f64 {
        match (self.m0, self.m1) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!("trimmed diagrams always have an accepting branch"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bdd {
    variables: Vec<usize>,
    nodes: Vec<Node>,
    layer_start: Vec<usize>,
}

impl Bdd {
    /// Builds a diagram from raw layers and reduces it.
    ///
    /// `layers[l][k]` is node `k` of the layer for `variables[l]`; node 0 of
    /// layer 0 is the root. Unreachable nodes are dropped.
    pub fn from_layers(variables: Vec<usize>, layers: Vec<Vec<Node>>) -> Result<Bdd, BddError> {
        if variables.is_empty() {
            return Err(BddError::EmptyScope);
        }
        if variables.len() != layers.len() {
            return Err(BddError::Malformed(format!(
                "{} variables but {} layers",
                variables.len(),
                layers.len()
            )));
        }
        check_distinct(&variables)?;
        let n = layers.len();
        for (l, layer) in layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(BddError::Malformed(format!("layer {l} is empty")));
            }
            let next_width = layers.get(l + 1).map_or(0, |x| x.len());
            for node in layer {
                for arc in [node.lo, node.hi] {
                    match arc {
                        Arc::True if l + 1 != n => {
                            return Err(BddError::Malformed(format!(
                                "arc to TRUE from inner layer {l}"
                            )))
                        }
                        Arc::Node(k) if k as usize >= next_width => {
                            return Err(BddError::Malformed(format!(
                                "arc from layer {l} to missing node {k}"
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
        let layers = reduce_layers(layers)?;
        Ok(Bdd::from_reduced(variables, layers))
    }

    fn from_reduced(variables: Vec<usize>, layers: Vec<Vec<Node>>) -> Bdd {
        let mut layer_start = Vec::with_capacity(layers.len() + 1);
        let mut nodes = Vec::with_capacity(layers.iter().map(Vec::len).sum());
        for layer in layers {
            layer_start.push(nodes.len());
            nodes.extend(layer);
        }
        layer_start.push(nodes.len());
        Bdd {
            variables,
            nodes,
            layer_start,
        }
    }

    /// Diagram of the row `sum_i coefficients[i] * x_{variables[i]} = rhs`.
    ///
    /// Nodes are keyed by the partial sum reached so far; sums that can no
    /// longer hit `rhs` with the remaining coefficients are pruned during
    /// construction, and the final reduction merges equivalent sums.
    pub fn equality(coefficients: &[i64], rhs: i64, variables: &[usize]) -> Result<Bdd, BddError> {
        if coefficients.len() != variables.len() {
            return Err(BddError::Malformed(format!(
                "{} coefficients for {} variables",
                coefficients.len(),
                variables.len()
            )));
        }
        if variables.is_empty() {
            return Err(BddError::EmptyScope);
        }
        check_distinct(variables)?;
        let n = coefficients.len();
        // reachable remainder range for the suffix starting at each layer
        let mut suffix_min = vec![0i64; n + 1];
        let mut suffix_max = vec![0i64; n + 1];
        for l in (0..n).rev() {
            let a = coefficients[l];
            suffix_min[l] = suffix_min[l + 1] + a.min(0);
            suffix_max[l] = suffix_max[l + 1] + a.max(0);
        }
        let viable = |l: usize, sum: i64| {
            let need = rhs - sum;
            need >= suffix_min[l] && need <= suffix_max[l]
        };
        if !viable(0, 0) {
            return Err(BddError::EmptyFeasibleSet);
        }

        let mut layers: Vec<Vec<Node>> = Vec::with_capacity(n);
        let mut current: BTreeMap<i64, u32> = BTreeMap::new();
        current.insert(0, 0);
        for l in 0..n {
            let a = coefficients[l];
            let mut next: BTreeMap<i64, u32> = BTreeMap::new();
            if l + 1 < n {
                for &sum in current.keys() {
                    for s in [sum, sum + a] {
                        if viable(l + 1, s) {
                            next.insert(s, 0);
                        }
                    }
                }
                for (k, idx) in next.values_mut().enumerate() {
                    *idx = k as u32;
                }
            }
            let target = |s: i64| -> Arc {
                if l + 1 == n {
                    if s == rhs {
                        Arc::True
                    } else {
                        Arc::False
                    }
                } else {
                    next.get(&s).map_or(Arc::False, |&k| Arc::Node(k))
                }
            };
            let layer = current
                .keys()
                .map(|&sum| Node::new(target(sum), target(sum + a)))
                .collect();
            layers.push(layer);
            current = next;
        }
        let layers = reduce_layers(layers)?;
        Ok(Bdd::from_reduced(variables.to_vec(), layers))
    }

    /// Global identifiers of the variables, in layer order.
    pub fn variables(&self) -> &[usize] {
        &self.variables
    }

    pub fn num_layers(&self) -> usize {
        self.variables.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn layer(&self, l: usize) -> &[Node] {
        &self.nodes[self.layer_start[l]..self.layer_start[l + 1]]
    }

    /// Offset of layer `l` in node-indexed arrays of length `num_nodes()`.
    #[inline]
    pub fn layer_offset(&self, l: usize) -> usize {
        self.layer_start[l]
    }

    pub fn layer_widths(&self) -> Vec<usize> {
        self.layer_start.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn layers(&self) -> Vec<Vec<Node>> {
        (0..self.num_layers()).map(|l| self.layer(l).to_vec()).collect()
    }

    /// Same diagram over different variable identifiers.
    pub fn relabel(&self, variables: Vec<usize>) -> Result<Bdd, BddError> {
        if variables.len() != self.variables.len() {
            return Err(BddError::Malformed("relabel changes the variable count".into()));
        }
        check_distinct(&variables)?;
        Ok(Bdd {
            variables,
            nodes: self.nodes.clone(),
            layer_start: self.layer_start.clone(),
        })
    }

    /// Follows `assignment` (indexed by layer) from the root.
    pub fn accepts(&self, assignment: &[bool]) -> bool {
        assert_eq!(assignment.len(), self.num_layers());
        let mut node = 0usize;
        for (l, &value) in assignment.iter().enumerate() {
            match self.layer(l)[node].arc(value) {
                Arc::False => return false,
                Arc::True => return l + 1 == self.num_layers(),
                Arc::Node(k) => node = k as usize,
            }
        }
        false
    }

    /// True when every assignment of the scope is accepted.
    pub fn is_tautology(&self) -> bool {
        (0..self.num_layers()).all(|l| {
            let layer = self.layer(l);
            layer.len() == 1 && layer[0].lo == layer[0].hi && !layer[0].lo.is_false()
        })
    }

    pub fn count_accepting_paths(&self) -> u128 {
        let n = self.num_layers();
        let mut below: Vec<u128> = Vec::new();
        for l in (0..n).rev() {
            let here: Vec<u128> = self
                .layer(l)
                .iter()
                .map(|node| {
                    [node.lo, node.hi]
                        .iter()
                        .map(|arc| match *arc {
                            Arc::False => 0,
                            Arc::True => 1,
                            Arc::Node(k) => below[k as usize],
                        })
                        .sum()
                })
                .collect();
            below = here;
        }
        below[0]
    }

    /// Cost-to-TRUE for every node under one-arc costs `costs` (per layer).
    pub fn backward_distances(&self, costs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(costs.len(), self.num_layers());
        debug_assert_eq!(out.len(), self.num_nodes());
        let n = self.num_layers();
        for l in (0..n).rev() {
            self.backward_layer(l, costs[l], out);
        }
    }

    /// Recomputes cost-to-TRUE of layer `l` from layer `l + 1`.
    #[inline]
    pub fn backward_layer(&self, l: usize, cost: f64, out: &mut [f64]) {
        let start = self.layer_start[l];
        let end = self.layer_start[l + 1];
        // next layer starts where this one ends
        for v in start..end {
            let node = self.nodes[v];
            let lo = arc_distance(node.lo, end, out);
            let hi = arc_distance(node.hi, end, out).map(|d| d + cost);
            out[v] = min_opt(lo, hi).expect("trimmed node has a live arc");
        }
    }

    /// Cost-from-root for every node under one-arc costs `costs`.
    pub fn forward_distances(&self, costs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_nodes());
        out[0] = 0.0;
        for l in 0..self.num_layers().saturating_sub(1) {
            self.forward_layer(l, costs[l], out);
        }
    }

    /// Pushes cost-from-root of layer `l` into layer `l + 1`.
    #[inline]
    pub fn forward_layer(&self, l: usize, cost: f64, out: &mut [f64]) {
        let start = self.layer_start[l];
        let end = self.layer_start[l + 1];
        let next_end = self.layer_start[l + 2];
        out[end..next_end].fill(f64::INFINITY);
        for v in start..end {
            let node = self.nodes[v];
            let d = out[v];
            if let Arc::Node(k) = node.lo {
                let w = end + k as usize;
                out[w] = out[w].min(d);
            }
            if let Arc::Node(k) = node.hi {
                let w = end + k as usize;
                out[w] = out[w].min(d + cost);
            }
        }
    }

    /// Optimum of the whole diagram from forward distances: min over the last
    /// layer's arcs into TRUE.
    pub fn optimum_from_forward(&self, cost_last: f64, fwd: &[f64]) -> f64 {
        let l = self.num_layers() - 1;
        let mut best = f64::INFINITY;
        for v in self.layer_start[l]..self.layer_start[l + 1] {
            let node = self.nodes[v];
            if node.lo == Arc::True {
                best = best.min(fwd[v]);
            }
            if node.hi == Arc::True {
                best = best.min(fwd[v] + cost_last);
            }
        }
        best
    }

    /// Min-marginals of layer `l` given forward distances valid on layer `l`
    /// and backward distances valid on layer `l + 1`.
    #[inline]
    pub fn layer_min_marginals(&self, l: usize, cost: f64, fwd: &[f64], bwd: &[f64]) -> MinMarginalPair {
        let start = self.layer_start[l];
        let end = self.layer_start[l + 1];
        let mut m0: Option<f64> = None;
        let mut m1: Option<f64> = None;
        for v in start..end {
            let node = self.nodes[v];
            if let Some(d) = arc_distance(node.lo, end, bwd) {
                m0 = min_opt(m0, Some(fwd[v] + d));
            }
            if let Some(d) = arc_distance(node.hi, end, bwd) {
                m1 = min_opt(m1, Some(fwd[v] + cost + d));
            }
        }
        MinMarginalPair { m0, m1 }
    }

    /// Cheapest accepted assignment (indexed by layer).
    ///
    /// Ties prefer the zero-arc, which yields the lexicographically smallest
    /// minimiser.
    pub fn min_assignment(&self, costs: &[f64]) -> (f64, Vec<bool>) {
        assert_eq!(costs.len(), self.num_layers(), "cost vector length");
        let mut bwd = vec![0.0; self.num_nodes()];
        self.backward_distances(costs, &mut bwd);
        let assignment = self.argmin_from_backward(costs, &bwd);
        (bwd[0], assignment)
    }

    /// Walks down from the root along cheapest arcs.
    pub fn argmin_from_backward(&self, costs: &[f64], bwd: &[f64]) -> Vec<bool> {
        let n = self.num_layers();
        let mut out = Vec::with_capacity(n);
        let mut v = 0usize;
        for l in 0..n {
            let end = self.layer_start[l + 1];
            let node = self.nodes[v];
            let lo = arc_distance(node.lo, end, bwd);
            let hi = arc_distance(node.hi, end, bwd).map(|d| d + costs[l]);
            let take_hi = match (lo, hi) {
                (Some(a), Some(b)) => b < a,
                (None, Some(_)) => true,
                _ => false,
            };
            out.push(take_hi);
            if let Arc::Node(k) = node.arc(take_hi) {
                v = end + k as usize;
            }
        }
        out
    }

    /// Optimal value only, with rolling two-layer scratch space.
    pub fn min_value(&self, costs: &[f64]) -> f64 {
        let n = self.num_layers();
        let mut below: Vec<f64> = Vec::new();
        let mut here: Vec<f64> = Vec::new();
        for l in (0..n).rev() {
            here.clear();
            for node in self.layer(l) {
                let d = |arc: Arc| match arc {
                    Arc::False => None,
                    Arc::True => Some(0.0),
                    Arc::Node(k) => Some(below[k as usize]),
                };
                let lo = d(node.lo);
                let hi = d(node.hi).map(|x| x + costs[l]);
                here.push(min_opt(lo, hi).expect("trimmed node has a live arc"));
            }
            std::mem::swap(&mut below, &mut here);
        }
        below[0]
    }

    /// Min-marginals for every layer via one forward and one backward sweep.
    pub fn min_marginals(&self, costs: &[f64]) -> Vec<MinMarginalPair> {
        assert_eq!(costs.len(), self.num_layers(), "cost vector length");
        let mut fwd = vec![0.0; self.num_nodes()];
        let mut bwd = vec![0.0; self.num_nodes()];
        self.forward_distances(costs, &mut fwd);
        self.backward_distances(costs, &mut bwd);
        (0..self.num_layers())
            .map(|l| self.layer_min_marginals(l, costs[l], &fwd, &bwd))
            .collect()
    }

    /// Conditions on the layers with `Some(value)` in `fixes` and removes those
    /// layers.
    ///
    /// Returns `Ok(None)` when no variable is left or the remaining function
    /// is constant true, and `EmptyFeasibleSet` when the fixes are
    /// contradictory.
    pub fn restrict(&self, fixes: &[Option<bool>]) -> Result<Option<Bdd>, BddError> {
        assert_eq!(fixes.len(), self.num_layers());
        let mut layers = self.layers();
        for (l, fix) in fixes.iter().enumerate() {
            if let Some(value) = *fix {
                for node in &mut layers[l] {
                    if value {
                        node.lo = Arc::False;
                    } else {
                        node.hi = Arc::False;
                    }
                }
            }
        }
        let mut layers = reduce_layers(layers)?;
        let mut variables = self.variables.clone();
        // Splice out fixed layers; each of their nodes keeps one live arc.
        for l in (0..layers.len()).rev() {
            let Some(value) = fixes[l] else { continue };
            let through: Vec<Arc> = layers[l].iter().map(|node| node.arc(value)).collect();
            if l == 0 {
                if layers.len() == 1 {
                    return Ok(None);
                }
                // root collapses onto its single live successor
                let Arc::Node(k) = through[0] else {
                    unreachable!("inner layer arcs into a live node")
                };
                layers[1].swap(0, k as usize);
                // nothing points into layer 1 once layer 0 is gone
                layers.remove(0);
                variables.remove(0);
            } else {
                let prev = &mut layers[l - 1];
                for node in prev.iter_mut() {
                    for arc in [&mut node.lo, &mut node.hi] {
                        if let Arc::Node(k) = *arc {
                            *arc = through[k as usize];
                        }
                    }
                }
                layers.remove(l);
                variables.remove(l);
            }
        }
        let layers = reduce_layers(layers)?;
        let bdd = Bdd::from_reduced(variables, layers);
        if bdd.is_tautology() {
            Ok(None)
        } else {
            Ok(Some(bdd))
        }
    }
}

#[inline]
fn arc_distance(arc: Arc, next_start: usize, dist: &[f64]) -> Option<f64> {
    match arc {
        Arc::False => None,
        Arc::True => Some(0.0),
        Arc::Node(k) => Some(dist[next_start + k as usize]),
    }
}

#[inline]
fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y < x { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn check_distinct(variables: &[usize]) -> Result<(), BddError> {
    let mut sorted = variables.to_vec();
    sorted.sort_unstable();
    match sorted.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(BddError::DuplicateVariable(w[0])),
        None => Ok(()),
    }
}

/// Removes nodes that cannot reach TRUE, merges nodes with equal successors,
/// then drops nodes unreachable from the root. Surviving nodes keep their
/// relative order, so reducing a reduced diagram is the identity.
pub(crate) fn reduce_layers(layers: Vec<Vec<Node>>) -> Result<Vec<Vec<Node>>, BddError> {
    let n = layers.len();
    let mut reduced: Vec<Vec<Node>> = vec![Vec::new(); n];
    // old index -> new arc, for the layer below the one being processed
    let mut below_map: Vec<Arc> = Vec::new();
    for l in (0..n).rev() {
        let mut seen: HashMap<Node, u32> = HashMap::new();
        let mut map = Vec::with_capacity(layers[l].len());
        for node in &layers[l] {
            let fix = |arc: Arc| match arc {
                Arc::Node(k) => below_map[k as usize],
                Arc::True if l + 1 == n => Arc::True,
                Arc::True => Arc::False,
                Arc::False => Arc::False,
            };
            let node = Node::new(fix(node.lo), fix(node.hi));
            if node.lo.is_false() && node.hi.is_false() {
                map.push(Arc::False);
                continue;
            }
            let next_id = reduced[l].len() as u32;
            let id = *seen.entry(node).or_insert_with(|| {
                reduced[l].push(node);
                next_id
            });
            map.push(Arc::Node(id));
        }
        below_map = map;
    }
    match below_map.first() {
        Some(Arc::Node(_)) => {}
        _ => return Err(BddError::EmptyFeasibleSet),
    }
    // Reachability from the (possibly renumbered) root.
    let Arc::Node(root) = below_map[0] else { unreachable!() };
    let mut alive: Vec<Vec<bool>> = reduced.iter().map(|layer| vec![false; layer.len()]).collect();
    alive[0][root as usize] = true;
    for l in 0..n.saturating_sub(1) {
        for (k, node) in reduced[l].iter().enumerate() {
            if !alive[l][k] {
                continue;
            }
            for arc in [node.lo, node.hi] {
                if let Arc::Node(j) = arc {
                    alive[l + 1][j as usize] = true;
                }
            }
        }
    }
    let mut out: Vec<Vec<Node>> = vec![Vec::new(); n];
    let mut below_index: Vec<u32> = Vec::new();
    for l in (0..n).rev() {
        let mut index = vec![u32::MAX; reduced[l].len()];
        // root first in layer 0
        let order: Vec<usize> = if l == 0 {
            vec![root as usize]
        } else {
            (0..reduced[l].len()).filter(|&k| alive[l][k]).collect()
        };
        for k in order {
            let node = reduced[l][k];
            let fix = |arc: Arc| match arc {
                Arc::Node(j) => Arc::Node(below_index[j as usize]),
                other => other,
            };
            index[k] = out[l].len() as u32;
            out[l].push(Node::new(fix(node.lo), fix(node.hi)));
        }
        below_index = index;
    }
    Ok(out)
}
