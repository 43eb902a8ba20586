//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use dualmatch::mesh::{shapes, FeatureMatrix, Mesh};
use dualmatch::product::{build_matching, MatchingProgram, ProductKind, ProductSpace};
use dualmatch::{IlpInstance, LinearRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random equality rows with a planted feasible point. Costs are random
/// integers divided by 4 so that optima are exact in floating point.
pub fn random_instance(rng: &mut ChaCha8Rng, max_vars: usize, max_rows: usize) -> (IlpInstance, Vec<LinearRow>) {
    let n = rng.gen_range(4..=max_vars);
    let m = rng.gen_range(1..=max_rows);
    let planted: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let k = rng.gen_range(2..=n.min(8));
        let mut vars: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            vars.swap(i, j);
        }
        let terms: Vec<(usize, i64)> = vars[..k]
            .iter()
            .map(|&v| {
                let c = if rng.gen_bool(0.7) { 1 } else { [-2, -1, 2][rng.gen_range(0..3)] };
                (v, c)
            })
            .collect();
        let rhs = terms.iter().filter(|(v, _)| planted[*v]).map(|(_, c)| c).sum();
        rows.push(LinearRow::new(terms, rhs));
    }
    let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(-8..=12) as f64 / 4.0).collect();
    (IlpInstance::from_rows(costs, rows.clone()).unwrap(), rows)
}

/// Exhaustive minimum over all 2^n assignments (n <= 24).
pub fn brute_force(costs: &[f64], rows: &[LinearRow]) -> Option<(f64, Vec<bool>)> {
    let n = costs.len();
    assert!(n <= 24);
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1 << n) {
        let ok = rows.iter().all(|r| {
            r.terms
                .iter()
                .filter(|(v, _)| mask >> v & 1 == 1)
                .map(|(_, c)| c)
                .sum::<i64>()
                == r.rhs
        });
        if !ok {
            continue;
        }
        let value: f64 = (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| costs[v]).sum();
        if best.is_none_or(|(b, _)| value < b) {
            best = Some((value, mask));
        }
    }
    best.map(|(v, mask)| (v, (0..n).map(|i| mask >> i & 1 == 1).collect()))
}

/// Depth-first search with bound propagation over the linear rows. Shares
/// no code with the library solvers. Returns `None` on infeasibility and
/// panics on timeout.
pub fn propagation_oracle(costs: &[f64], rows: &[LinearRow], limit: Duration) -> Option<(f64, Vec<bool>)> {
    let n = costs.len();
    let mut var_rows = vec![Vec::new(); n];
    for (j, r) in rows.iter().enumerate() {
        for &(v, c) in &r.terms {
            var_rows[v].push((j, c));
        }
    }
    let mut search = Search {
        costs,
        rows,
        var_rows,
        value: vec![None; n],
        best: None,
        start: Instant::now(),
        limit,
    };
    search.dfs(0.0);
    search.best
}

struct Search<'a> {
    costs: &'a [f64],
    rows: &'a [LinearRow],
    var_rows: Vec<Vec<(usize, i64)>>,
    value: Vec<Option<bool>>,
    best: Option<(f64, Vec<bool>)>,
    start: Instant,
    limit: Duration,
}

impl Search<'_> {
    /// Range of row `j` over the free variables, and the fixed part.
    fn row_state(&self, j: usize) -> (i64, i64, i64) {
        let (mut fixed, mut lo, mut hi) = (0, 0, 0);
        for &(v, c) in &self.rows[j].terms {
            match self.value[v] {
                Some(true) => fixed += c,
                Some(false) => {}
                None if c > 0 => hi += c,
                None => lo += c,
            }
        }
        (fixed, lo, hi)
    }

    /// Unit propagation to a fixpoint; false on conflict. Newly fixed
    /// variables are appended to `trail`.
    fn propagate(&mut self, seed: &[usize], trail: &mut Vec<usize>) -> bool {
        let mut queue: Vec<usize> = seed.to_vec();
        while let Some(j) = queue.pop() {
            let (fixed, lo, hi) = self.row_state(j);
            let need = self.rows[j].rhs - fixed;
            if need < lo || need > hi {
                return false;
            }
            let force = |c: i64| -> Option<bool> {
                if need == lo {
                    Some(c < 0)
                } else if need == hi {
                    Some(c > 0)
                } else {
                    None
                }
            };
            let terms = self.rows[j].terms.clone();
            for (v, c) in terms {
                if self.value[v].is_some() {
                    continue;
                }
                if let Some(b) = force(c) {
                    self.value[v] = Some(b);
                    trail.push(v);
                    for &(k, _) in &self.var_rows[v] {
                        queue.push(k);
                    }
                }
            }
        }
        true
    }

    fn undo(&mut self, trail: &[usize]) {
        for &v in trail {
            self.value[v] = None;
        }
    }

    /// Current cost, plus the cheapest way to complete a greedy set of
    /// variable-disjoint rows with unit coefficients, plus every remaining
    /// negative free cost.
    fn lower_bound(&self, cost: f64) -> f64 {
        let mut used = vec![false; self.costs.len()];
        let mut bound = cost;
        for row in self.rows {
            if row.terms.iter().any(|&(v, c)| c != 1 || used[v]) {
                continue;
            }
            let fixed = row.terms.iter().filter(|(v, _)| self.value[*v] == Some(true)).count() as i64;
            let need = row.rhs - fixed;
            let mut free: Vec<f64> = row
                .terms
                .iter()
                .filter(|(v, _)| self.value[*v].is_none())
                .map(|(v, _)| self.costs[*v])
                .collect();
            if need < 0 || need as usize > free.len() {
                return f64::INFINITY;
            }
            free.sort_by(f64::total_cmp);
            bound += free[..need as usize].iter().sum::<f64>();
            for &(v, _) in &row.terms {
                used[v] = true;
            }
        }
        bound
            + self
                .value
                .iter()
                .zip(self.costs)
                .zip(&used)
                .filter(|((x, c), u)| x.is_none() && **c < 0.0 && !**u)
                .map(|((_, c), _)| c)
                .sum::<f64>()
    }

    fn dfs(&mut self, cost: f64) {
        assert!(self.start.elapsed() < self.limit, "oracle timed out");
        if let Some((b, _)) = &self.best {
            if self.lower_bound(cost) >= *b - 1e-12 {
                return;
            }
        }
        // branch on a free variable of the tightest row with a free variable
        let mut pick = None;
        let mut best_free = usize::MAX;
        for j in 0..self.rows.len() {
            let free = self.rows[j].terms.iter().filter(|(v, _)| self.value[*v].is_none()).count();
            if free > 0 && free < best_free {
                best_free = free;
                pick = self.rows[j].terms.iter().find(|(v, _)| self.value[*v].is_none()).map(|t| t.0);
            }
        }
        let Some(v) = pick.or_else(|| self.value.iter().position(Option::is_none)) else {
            let x: Vec<bool> = self.value.iter().map(|b| b.unwrap()).collect();
            let ok = self.rows.iter().all(|r| r.is_satisfied(&x));
            if ok && self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, x));
            }
            return;
        };
        let order = if self.costs[v] < 0.0 { [true, false] } else { [false, true] };
        for b in order {
            self.value[v] = Some(b);
            let mut trail = vec![v];
            let seeds: Vec<usize> = self.var_rows[v].iter().map(|r| r.0).collect();
            if self.propagate(&seeds, &mut trail) {
                let added: f64 = trail.iter().filter(|&&u| self.value[u] == Some(true)).map(|&u| self.costs[u]).sum();
                self.dfs(cost + added);
            }
            self.undo(&trail);
        }
    }
}

pub fn rotate(mesh: &Mesh, about_z: f64, about_x: f64) -> Mesh {
    let mut out = mesh.clone();
    for p in &mut out.vertices {
        let (x, y) = (about_z.cos() * p[0] - about_z.sin() * p[1], about_z.sin() * p[0] + about_z.cos() * p[1]);
        let (y, z) = (about_x.cos() * y - about_x.sin() * p[2], about_x.sin() * y + about_x.cos() * p[2]);
        *p = [x, y, z];
    }
    out
}

/// `mesh` against a rotated copy, with vertex positions as features.
pub fn rotated_pair(mesh: &Mesh, about_z: f64, about_x: f64) -> (Mesh, Mesh, FeatureMatrix, FeatureMatrix) {
    let other = rotate(mesh, about_z, about_x);
    let fm = FeatureMatrix::from_positions(mesh);
    let fnn = FeatureMatrix::from_positions(&other);
    (mesh.clone(), other, fm, fnn)
}

pub fn shape_program(mesh: &Mesh, about_z: f64, about_x: f64) -> (ProductSpace, MatchingProgram) {
    let (m, n, fm, fnn) = rotated_pair(mesh, about_z, about_x);
    build_matching(&m, &n, &fm, &fnn).unwrap()
}

pub fn tetra_program() -> (ProductSpace, MatchingProgram) {
    shape_program(&shapes::tetrahedron(), 0.3, 0.1)
}

pub fn octa_program() -> (ProductSpace, MatchingProgram) {
    shape_program(&shapes::octahedron(), 0.4, -0.2)
}

pub fn rows_of(instance: &IlpInstance) -> Vec<LinearRow> {
    instance.rows().unwrap().into_iter().cloned().collect()
}

/// Dense BFGS inverse update applied pair by pair, oldest first.
pub fn dense_inverse(pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<Vec<f64>> {
    let n = pairs[0].0.len();
    let (s, y) = &pairs[0];
    let scale = dot(s, y) / dot(y, y);
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect()).collect();
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / dot(s, y);
        // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
        let mut left = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    let a = if i == k { 1.0 } else { 0.0 } - rho * s[i] * y[k];
                    acc += a * h[k][j];
                }
                left[i][j] = acc;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    let b = if k == j { 1.0 } else { 0.0 } - rho * y[k] * s[j];
                    acc += left[i][k] * b;
                }
                h[i][j] = acc + rho * s[i] * s[j];
            }
        }
    }
    h
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Cls {
    Face,
    Edge,
    Vertex,
}

/// Every oriented triple of ext(X), all rotations spelled out.
pub fn ext_all(mesh: &Mesh) -> Vec<([usize; 3], Cls)> {
    let mut out = Vec::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            out.push(([t[k], t[(k + 1) % 3], t[(k + 2) % 3]], Cls::Face));
        }
    }
    let mut edges = BTreeSet::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in edges {
        for t in [[a, a, b], [a, b, a], [b, a, a], [a, b, b], [b, a, b], [b, b, a]] {
            out.push((t, Cls::Edge));
        }
    }
    for v in 0..mesh.vertices.len() {
        out.push(([v, v, v], Cls::Vertex));
    }
    out
}

pub type Triple = [(usize, usize); 3];

/// ext(M) x ext(N) with at least one face side, quotiented by simultaneous
/// rotation.
pub fn brute_product(m: &Mesh, n: &Mesh) -> BTreeSet<(Triple, Cls, Cls)> {
    let (em, en) = (ext_all(m), ext_all(n));
    let mut out = BTreeSet::new();
    for &(tm, cm) in &em {
        for &(tn, cn) in &en {
            if cm != Cls::Face && cn != Cls::Face {
                continue;
            }
            let pairs = [(tm[0], tn[0]), (tm[1], tn[1]), (tm[2], tn[2])];
            let canon = (0..3).map(|k| [pairs[k], pairs[(k + 1) % 3], pairs[(k + 2) % 3]]).min().unwrap();
            out.insert((canon, cm, cn));
        }
    }
    out
}

pub fn classes(kind: ProductKind) -> (Cls, Cls) {
    match kind {
        ProductKind::TriTri => (Cls::Face, Cls::Face),
        ProductKind::TriEdge => (Cls::Face, Cls::Edge),
        ProductKind::TriVertex => (Cls::Face, Cls::Vertex),
        ProductKind::EdgeTri => (Cls::Edge, Cls::Face),
        ProductKind::VertexTri => (Cls::Vertex, Cls::Face),
    }
}


/// Our enumeration in the same shape as [`brute_product`].
pub fn product_set(ps: &ProductSpace) -> BTreeSet<(Triple, Cls, Cls)> {
    ps.triangles
        .iter()
        .map(|t| {
            let (a, b) = classes(t.kind);
            (t.pairs, a, b)
        })
        .collect()
}
