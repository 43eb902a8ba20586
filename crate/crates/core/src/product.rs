//! Product space of two meshes and the matching program over it.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{InstanceError, MeshError, ProductError};
use crate::instance::{IlpInstance, LinearRow};
use crate::mesh::{FeatureMatrix, Mesh, Topology};

/// A vertex of the product graph: (vertex of M, vertex of N).
pub type VertexPair = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductKind {
    TriTri,
    TriEdge,
    TriVertex,
    EdgeTri,
    VertexTri,
}

impl ProductKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProductKind::TriTri => "tri-tri",
            ProductKind::TriEdge => "tri-edge",
            ProductKind::TriVertex => "tri-vertex",
            ProductKind::EdgeTri => "edge-tri",
            ProductKind::VertexTri => "vertex-tri",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductTriangle {
    /// Canonical rotation: lexicographically smallest of the three.
    pub pairs: [VertexPair; 3],
    pub kind: ProductKind,
    /// Face of M whose rotation forms the M side, if non-degenerate.
    pub m_face: Option<u32>,
    pub n_face: Option<u32>,
}

impl ProductTriangle {
    fn canonical(pairs: [VertexPair; 3], kind: ProductKind, m_face: Option<u32>, n_face: Option<u32>) -> Self {
        let rot = |k: usize| [pairs[k % 3], pairs[(k + 1) % 3], pairs[(k + 2) % 3]];
        let best = (0..3).map(rot).min().unwrap();
        ProductTriangle {
            pairs: best,
            kind,
            m_face,
            n_face,
        }
    }

    /// Oriented boundary edges `(p1 -> p2), (p2 -> p3), (p3 -> p1)`.
    pub fn boundary(&self) -> [(VertexPair, VertexPair); 3] {
        let p = self.pairs;
        [(p[0], p[1]), (p[1], p[2]), (p[2], p[0])]
    }
}

/// Product edge with its endpoints in canonical (ascending) order, and the
/// sign of an oriented edge relative to it.
pub fn canonical_edge(from: VertexPair, to: VertexPair) -> ((VertexPair, VertexPair), i64) {
    if from < to {
        ((from, to), 1)
    } else {
        ((to, from), -1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductSpace {
    pub triangles: Vec<ProductTriangle>,
    pub num_faces_m: usize,
    pub num_faces_n: usize,
    /// Empty until [`ProductSpace::with_costs`].
    pub costs: Vec<f64>,
}

/// Both meshes valid and of equal genus.
pub fn validate_mesh_pair(m: &Mesh, n: &Mesh) -> Result<(Topology, Topology), MeshError> {
    let tm = m.validate("first mesh")?;
    let tn = n.validate("second mesh")?;
    if tm.genus != tn.genus {
        return Err(MeshError::GenusMismatch { a: tm.genus, b: tn.genus });
    }
    Ok((tm, tn))
}

#[derive(Clone, Copy, Debug)]
enum Ext {
    Face(u32),
    Edge,
    Vertex,
}

/// One representative per rotation class of ext(X).
fn ext_classes(mesh: &Mesh) -> Vec<([usize; 3], Ext)> {
    let mut out = Vec::new();
    for (f, t) in mesh.triangles.iter().enumerate() {
        out.push((*t, Ext::Face(f as u32)));
    }
    for (a, b) in mesh.edges() {
        out.push(([a, a, b], Ext::Edge));
        out.push(([a, b, b], Ext::Edge));
    }
    for v in 0..mesh.num_vertices() {
        out.push(([v, v, v], Ext::Vertex));
    }
    out
}

fn rotations(t: [usize; 3]) -> [[usize; 3]; 3] {
    [t, [t[1], t[2], t[0]], [t[2], t[0], t[1]]]
}

fn kind_of(a: Ext, b: Ext) -> Option<ProductKind> {
    match (a, b) {
        (Ext::Face(_), Ext::Face(_)) => Some(ProductKind::TriTri),
        (Ext::Face(_), Ext::Edge) => Some(ProductKind::TriEdge),
        (Ext::Face(_), Ext::Vertex) => Some(ProductKind::TriVertex),
        (Ext::Edge, Ext::Face(_)) => Some(ProductKind::EdgeTri),
        (Ext::Vertex, Ext::Face(_)) => Some(ProductKind::VertexTri),
        _ => None,
    }
}

fn face_id(e: Ext) -> Option<u32> {
    match e {
        Ext::Face(f) => Some(f),
        _ => None,
    }
}

/// Enumerates product triangles, keeping only those whose three vertex pairs
/// pass `allowed`. Output order is sorted and thread-count independent.
pub fn enumerate_filtered<F>(m: &Mesh, n: &Mesh, allowed: F) -> ProductSpace
where
    F: Fn(usize, usize) -> bool + Sync,
{
    let ext_m = ext_classes(m);
    let ext_n = ext_classes(n);
    // M side fixed to its class representative; N side ranges over all
    // rotations unless either side is a vertex triple.
    let mut triangles: Vec<ProductTriangle> = ext_m
        .par_iter()
        .flat_map_iter(|&(tm, em)| {
            let mut local = Vec::new();
            for &(tn, en) in &ext_n {
                let Some(kind) = kind_of(em, en) else { continue };
                let rots: &[[usize; 3]] = &if matches!(em, Ext::Vertex) || matches!(en, Ext::Vertex) {
                    vec![tn]
                } else {
                    rotations(tn).to_vec()
                };
                for r in rots {
                    let pairs = [(tm[0], r[0]), (tm[1], r[1]), (tm[2], r[2])];
                    if pairs.iter().all(|&(a, b)| allowed(a, b)) {
                        local.push(ProductTriangle::canonical(pairs, kind, face_id(em), face_id(en)));
                    }
                }
            }
            local
        })
        .collect();
    triangles.par_sort_unstable();
    ProductSpace {
        triangles,
        num_faces_m: m.num_triangles(),
        num_faces_n: n.num_triangles(),
        costs: Vec::new(),
    }
}

pub fn enumerate_product_triangles(m: &Mesh, n: &Mesh) -> ProductSpace {
    enumerate_filtered(m, n, |_, _| true)
}

/// Row layout of an assembled matching program.
#[derive(Clone, Debug, PartialEq)]
pub struct RowLayout {
    pub boundary: Range<usize>,
    pub projection_m: Range<usize>,
    pub projection_n: Range<usize>,
    /// Canonical product edge of each boundary row.
    pub edges: Vec<(VertexPair, VertexPair)>,
}

#[derive(Clone, Debug)]
pub struct MatchingProgram {
    pub instance: IlpInstance,
    pub layout: RowLayout,
}

/// Linear rows of the matching program: boundary rows (= 0), then one row
/// per face of M, then one per face of N (= 1).
pub fn constraint_rows(ps: &ProductSpace) -> (Vec<LinearRow>, RowLayout) {
    let mut boundary: BTreeMap<(VertexPair, VertexPair), Vec<(usize, i64)>> = BTreeMap::new();
    let mut rows_m = vec![Vec::new(); ps.num_faces_m];
    let mut rows_n = vec![Vec::new(); ps.num_faces_n];
    for (p, t) in ps.triangles.iter().enumerate() {
        for (a, b) in t.boundary() {
            let (e, sign) = canonical_edge(a, b);
            boundary.entry(e).or_default().push((p, sign));
        }
        if let Some(f) = t.m_face {
            rows_m[f as usize].push((p, 1));
        }
        if let Some(f) = t.n_face {
            rows_n[f as usize].push((p, 1));
        }
    }
    let nb = boundary.len();
    let mut edges = Vec::with_capacity(nb);
    let mut rows = Vec::with_capacity(nb + ps.num_faces_m + ps.num_faces_n);
    for (e, terms) in boundary {
        edges.push(e);
        rows.push(LinearRow::new(terms, 0));
    }
    rows.extend(rows_m.into_iter().map(|t| LinearRow::new(t, 1)));
    rows.extend(rows_n.into_iter().map(|t| LinearRow::new(t, 1)));
    let layout = RowLayout {
        boundary: 0..nb,
        projection_m: nb..nb + ps.num_faces_m,
        projection_n: nb + ps.num_faces_m..nb + ps.num_faces_m + ps.num_faces_n,
        edges,
    };
    (rows, layout)
}

/// Compiles the matching program. Costs must have been attached.
pub fn assemble_constraints(ps: &ProductSpace) -> Result<MatchingProgram, InstanceError> {
    let (rows, layout) = constraint_rows(ps);
    let costs = if ps.costs.len() == ps.triangles.len() {
        ps.costs.clone()
    } else {
        vec![0.0; ps.triangles.len()]
    };
    let instance = IlpInstance::from_rows(costs, rows)?;
    Ok(MatchingProgram { instance, layout })
}

/// `c_p = sum_v (A_M[m_v] + A_N[n_v]) * |F_M[m_v] - F_N[n_v]|`.
pub fn feature_costs(
    ps: &ProductSpace,
    features_m: &FeatureMatrix,
    features_n: &FeatureMatrix,
    areas_m: &[f64],
    areas_n: &[f64],
) -> Result<Vec<f64>, MeshError> {
    if features_m.cols() != features_n.cols() {
        return Err(MeshError::FeatureDimensionMismatch {
            a: features_m.cols(),
            b: features_n.cols(),
        });
    }
    Ok(ps
        .triangles
        .par_iter()
        .map(|t| {
            t.pairs
                .iter()
                .map(|&(a, b)| (areas_m[a] + areas_n[b]) * features_m.distance(a, features_n, b))
                .sum()
        })
        .collect())
}

impl ProductSpace {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn with_costs(mut self, costs: Vec<f64>) -> Self {
        assert_eq!(costs.len(), self.triangles.len());
        self.costs = costs;
        self
    }

    /// Number of product triangles per kind.
    pub fn kind_counts(&self) -> BTreeMap<ProductKind, usize> {
        let mut out = BTreeMap::new();
        for t in &self.triangles {
            *out.entry(t.kind).or_default() += 1;
        }
        out
    }

    /// `|P| / (|T_M| |T_N|)`.
    pub fn ratio(&self) -> f64 {
        self.len() as f64 / (self.num_faces_m * self.num_faces_n) as f64
    }
}

/// Enumerates, attaches feature costs and compiles the program for a pair.
pub fn build_matching(
    m: &Mesh,
    n: &Mesh,
    features_m: &FeatureMatrix,
    features_n: &FeatureMatrix,
) -> Result<(ProductSpace, MatchingProgram), crate::solver::SolveError> {
    build_matching_filtered(m, n, features_m, features_n, |_, _| true)
}

pub fn build_matching_filtered<F>(
    m: &Mesh,
    n: &Mesh,
    features_m: &FeatureMatrix,
    features_n: &FeatureMatrix,
    allowed: F,
) -> Result<(ProductSpace, MatchingProgram), crate::solver::SolveError>
where
    F: Fn(usize, usize) -> bool + Sync,
{
    use crate::solver::SolveError;
    validate_mesh_pair(m, n).map_err(SolveError::Mesh)?;
    features_m.check_mesh(m).map_err(SolveError::Mesh)?;
    features_n.check_mesh(n).map_err(SolveError::Mesh)?;
    let areas_m = m.mixed_vertex_areas().map_err(SolveError::Mesh)?;
    let areas_n = n.mixed_vertex_areas().map_err(SolveError::Mesh)?;
    let ps = enumerate_filtered(m, n, allowed);
    let costs = feature_costs(&ps, features_m, features_n, &areas_m, &areas_n).map_err(SolveError::Mesh)?;
    let ps = ps.with_costs(costs);
    let empty = empty_projection_rows(&ps);
    if empty > 0 {
        return Err(SolveError::Product(ProductError::PrunedInfeasible(empty)));
    }
    let program = assemble_constraints(&ps)?;
    Ok((ps, program))
}

/// Number of face rows of either mesh that no product triangle covers.
pub fn empty_projection_rows(ps: &ProductSpace) -> usize {
    let mut seen_m = vec![false; ps.num_faces_m];
    let mut seen_n = vec![false; ps.num_faces_n];
    for t in &ps.triangles {
        if let Some(f) = t.m_face {
            seen_m[f as usize] = true;
        }
        if let Some(f) = t.n_face {
            seen_n[f as usize] = true;
        }
    }
    seen_m.iter().chain(&seen_n).filter(|s| !**s).count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub selected: Vec<usize>,
    /// Sorted, deduplicated.
    pub vertex_pairs: Vec<VertexPair>,
    /// Partner in N of every vertex of M, if any.
    pub point_map: Vec<Option<usize>>,
}

/// Rows violated by `x`, computed with integer arithmetic.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub violated: Vec<usize>,
    pub boundary_violations: usize,
    pub projection_m_violations: usize,
    pub projection_n_violations: usize,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.violated.is_empty()
    }
}

pub fn verify_solution(x: &[bool], rows: &[LinearRow], layout: Option<&RowLayout>) -> Result<VerifyReport, ProductError> {
    let expected = rows
        .iter()
        .flat_map(|r| r.terms.iter().map(|t| t.0 + 1))
        .max()
        .unwrap_or(0);
    if x.len() < expected {
        return Err(ProductError::LengthMismatch {
            got: x.len(),
            expected,
        });
    }
    let mut report = VerifyReport::default();
    for (i, row) in rows.iter().enumerate() {
        if row.is_satisfied(x) {
            continue;
        }
        report.violated.push(i);
        if let Some(l) = layout {
            if l.boundary.contains(&i) {
                report.boundary_violations += 1;
            } else if l.projection_m.contains(&i) {
                report.projection_m_violations += 1;
            } else if l.projection_n.contains(&i) {
                report.projection_n_violations += 1;
            }
        }
    }
    Ok(report)
}

/// Vertex correspondences of a feasible selection. Vertices of M matched to
/// several partners keep the one closest in feature space (lowest index on
/// ties).
pub fn decode_matching(
    x: &[bool],
    ps: &ProductSpace,
    program: &MatchingProgram,
    features_m: &FeatureMatrix,
    features_n: &FeatureMatrix,
) -> Result<Matching, ProductError> {
    if x.len() != ps.len() {
        return Err(ProductError::LengthMismatch {
            got: x.len(),
            expected: ps.len(),
        });
    }
    let violated = program.instance.violated(x).len();
    if violated > 0 {
        return Err(ProductError::InfeasibleInput(violated));
    }
    let selected: Vec<usize> = (0..x.len()).filter(|&p| x[p]).collect();
    let pairs: BTreeSet<VertexPair> = selected.iter().flat_map(|&p| ps.triangles[p].pairs).collect();
    let mut point_map: Vec<Option<usize>> = vec![None; features_m.rows()];
    let mut best = vec![f64::INFINITY; features_m.rows()];
    for &(a, b) in &pairs {
        let d = features_m.distance(a, features_n, b);
        // pairs iterate in ascending b, so strict < keeps the lowest index
        if d < best[a] {
            best[a] = d;
            point_map[a] = Some(b);
        }
    }
    Ok(Matching {
        selected,
        vertex_pairs: pairs.into_iter().collect(),
        point_map,
    })
}

/// Selection of the tri-tri identity triangles `((a,a),(b,b),(c,c))`,
/// feasible whenever M = N.
pub fn identity_selection(ps: &ProductSpace) -> Vec<bool> {
    ps.triangles
        .iter()
        .map(|t| t.kind == ProductKind::TriTri && t.pairs.iter().all(|&(a, b)| a == b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::*;

    #[test]
    fn tetra_counts() {
        let t = tetrahedron();
        let ps = enumerate_product_triangles(&t, &t);
        assert_eq!(ps.len(), 368);
        let k = ps.kind_counts();
        assert_eq!(k[&ProductKind::TriTri], 48);
        assert_eq!(k[&ProductKind::TriEdge], 144);
        assert_eq!(k[&ProductKind::EdgeTri], 144);
        assert_eq!(k[&ProductKind::TriVertex], 16);
        assert_eq!(k[&ProductKind::VertexTri], 16);
        let uniq: BTreeSet<_> = ps.triangles.iter().map(|t| t.pairs).collect();
        assert_eq!(uniq.len(), 368);
    }

    #[test]
    fn icosahedron_ratio() {
        let m = icosahedron();
        let ps = enumerate_product_triangles(&m, &m);
        assert_eq!(ps.len(), 8880);
        assert!((20.0..=24.0).contains(&ps.ratio()));
    }

    #[test]
    fn tetra_rows_and_identity() {
        let t = tetrahedron();
        let ps = enumerate_product_triangles(&t, &t);
        let (rows, layout) = constraint_rows(&ps);
        assert_eq!(layout.projection_m.len(), 4);
        assert_eq!(layout.projection_n.len(), 4);
        let mut in_boundary = vec![0; ps.len()];
        for r in &rows[layout.boundary.clone()] {
            for &(p, _) in &r.terms {
                in_boundary[p] += 1;
            }
        }
        assert!(in_boundary.iter().all(|&c| c == 3));
        let x = identity_selection(&ps);
        assert_eq!(x.iter().filter(|&&b| b).count(), 4);
        assert!(verify_solution(&x, &rows, Some(&layout)).unwrap().is_ok());
        let zeros = vec![false; ps.len()];
        let r = verify_solution(&zeros, &rows, Some(&layout)).unwrap();
        assert_eq!((r.projection_m_violations, r.projection_n_violations, r.boundary_violations), (4, 4, 0));
        let mut single = zeros.clone();
        single[0] = true;
        let r = verify_solution(&single, &rows, Some(&layout)).unwrap();
        assert_eq!(r.boundary_violations, 3);
    }

    #[test]
    fn cost_formula() {
        let fm = FeatureMatrix::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let fnn = FeatureMatrix::from_rows(&[vec![2.0], vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let ps = ProductSpace {
            triangles: vec![ProductTriangle::canonical([(0, 0), (1, 1), (2, 2)], ProductKind::TriTri, None, None)],
            num_faces_m: 0,
            num_faces_n: 0,
            costs: vec![],
        };
        let c = feature_costs(&ps, &fm, &fnn, &[0.25; 4], &[0.25; 4]).unwrap();
        assert_eq!(c, vec![1.0]);
    }
}
