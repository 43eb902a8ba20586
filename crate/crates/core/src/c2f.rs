//! Coarse-to-fine pruning of the product space.

use serde::{Deserialize, Serialize};

use crate::error::ProductError;
use crate::mesh::{FeatureMatrix, Mesh};
use crate::primal::GapReport;
use crate::product::{
    assemble_constraints, build_matching_filtered, decode_matching, empty_projection_rows, Matching, MatchingProgram,
    ProductSpace, VertexPair,
};
use crate::solver::{solve, SolveConfig, SolveError};

/// One mesh of a hierarchy. `projection[v]` is the vertex of the previous
/// (coarser) level that fine vertex `v` maps to; empty on the coarsest level.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionLevel {
    pub mesh: Mesh,
    pub projection: Vec<usize>,
}

impl ResolutionLevel {
    pub fn coarsest(mesh: Mesh) -> Self {
        ResolutionLevel {
            mesh,
            projection: Vec::new(),
        }
    }

    pub fn check(&self, coarse_vertices: usize) -> Result<(), String> {
        if self.projection.len() != self.mesh.num_vertices() {
            return Err(format!(
                "projection map has {} entries for {} vertices",
                self.projection.len(),
                self.mesh.num_vertices()
            ));
        }
        if let Some(v) = self.projection.iter().position(|&c| c >= coarse_vertices) {
            return Err(format!(
                "vertex {v} projects to {} but the coarser mesh has {coarse_vertices} vertices",
                self.projection[v]
            ));
        }
        Ok(())
    }

    /// Fine vertices projecting to each coarse vertex.
    fn anchors(&self, coarse_vertices: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); coarse_vertices];
        for (v, &c) in self.projection.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

/// Dense membership table of allowed fine vertex pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllowedPairs {
    cols: usize,
    bits: Vec<bool>,
}

impl AllowedPairs {
    pub fn all(rows: usize, cols: usize) -> Self {
        AllowedPairs {
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn from_pairs(rows: usize, cols: usize, pairs: &[VertexPair]) -> Self {
        let mut bits = vec![false; rows * cols];
        for &(a, b) in pairs {
            bits[a * cols + b] = true;
        }
        AllowedPairs { cols, bits }
    }

    pub fn contains(&self, m: usize, n: usize) -> bool {
        n < self.cols && self.bits.get(m * self.cols + n).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> Vec<VertexPair> {
        (0..self.bits.len())
            .filter(|&i| self.bits[i])
            .map(|i| (i / self.cols, i % self.cols))
            .collect()
    }
}

/// Fine pairs `(m', n')` such that some coarse match `(a, b)` has `m'`
/// within `ring` edges of a fine vertex projecting to `a`, and `n'` likewise
/// for `b`.
pub fn allowed_pairs(
    coarse_matches: &[VertexPair],
    coarse_vertices: (usize, usize),
    fine_m: &ResolutionLevel,
    fine_n: &ResolutionLevel,
    ring: usize,
) -> AllowedPairs {
    let anchors_m = fine_m.anchors(coarse_vertices.0);
    let anchors_n = fine_n.anchors(coarse_vertices.1);
    let rings_m = fine_m.mesh.one_rings();
    let rings_n = fine_n.mesh.one_rings();
    let cols = fine_n.mesh.num_vertices();
    let mut bits = vec![false; fine_m.mesh.num_vertices() * cols];
    for &(a, b) in coarse_matches {
        let rm = fine_m.mesh.ring_neighbourhood(&anchors_m[a], ring, &rings_m);
        let rn = fine_n.mesh.ring_neighbourhood(&anchors_n[b], ring, &rings_n);
        for &m in &rm {
            for &n in &rn {
                bits[m * cols + n] = true;
            }
        }
    }
    AllowedPairs { cols, bits }
}

#[derive(Clone, Debug)]
pub struct PrunedSpace {
    pub space: ProductSpace,
    /// Index in the unpruned space of every kept triangle.
    pub kept: Vec<usize>,
    pub program: MatchingProgram,
}

/// Keeps product triangles whose three vertex pairs are allowed and
/// reassembles the rows over them.
pub fn prune_product_space(ps: &ProductSpace, allowed: &AllowedPairs) -> Result<PrunedSpace, SolveError> {
    let kept: Vec<usize> = (0..ps.len())
        .filter(|&p| ps.triangles[p].pairs.iter().all(|&(a, b)| allowed.contains(a, b)))
        .collect();
    let space = ProductSpace {
        triangles: kept.iter().map(|&p| ps.triangles[p]).collect(),
        num_faces_m: ps.num_faces_m,
        num_faces_n: ps.num_faces_n,
        costs: if ps.costs.is_empty() {
            Vec::new()
        } else {
            kept.iter().map(|&p| ps.costs[p]).collect()
        },
    };
    let empty = empty_projection_rows(&space);
    if empty > 0 {
        return Err(ProductError::PrunedInfeasible(empty).into());
    }
    let program = assemble_constraints(&space)?;
    Ok(PrunedSpace { space, kept, program })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    /// Ring used for pruning; `None` on the unpruned coarsest level.
    pub ring: Option<usize>,
    pub num_triangles: (usize, usize),
    pub num_variables: usize,
    pub report: Option<GapReport>,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct HierarchyResult {
    pub levels: Vec<LevelReport>,
    pub space: ProductSpace,
    pub assignment: Vec<bool>,
    pub matching: Matching,
}

#[derive(Debug, thiserror::Error)]
pub enum HierarchyError {
    #[error("hierarchies have {a} and {b} levels")]
    LevelCount { a: usize, b: usize },
    #[error("level {level}: {message}")]
    BadLevel { level: usize, message: String },
    #[error("level {level}: {source}")]
    Solve { level: usize, source: SolveError },
    #[error("level {level}: no feasible matching found (rings tried: {rings:?})")]
    NoSolution { level: usize, rings: Vec<usize> },
}

/// Features of one level for both meshes.
#[derive(Clone, Debug)]
pub struct LevelFeatures {
    pub m: FeatureMatrix,
    pub n: FeatureMatrix,
}

/// Solves the coarsest level in full, then each finer level restricted to
/// the neighbourhood of the previous matching. `rings` is the ladder tried
/// per level until a feasible matching is found.
pub fn run_hierarchy(
    levels_m: &[ResolutionLevel],
    levels_n: &[ResolutionLevel],
    features: &[LevelFeatures],
    cfg: &SolveConfig,
    rings: &[usize],
) -> Result<HierarchyResult, HierarchyError> {
    if levels_m.len() != levels_n.len() || levels_m.len() != features.len() || levels_m.is_empty() {
        return Err(HierarchyError::LevelCount {
            a: levels_m.len(),
            b: levels_n.len(),
        });
    }
    let mut levels = Vec::new();
    let mut previous: Option<(Matching, usize, usize)> = None;
    let mut last = None;
    for level in 0..levels_m.len() {
        let (lm, ln, feat) = (&levels_m[level], &levels_n[level], &features[level]);
        let ladder: Vec<Option<usize>> = match &previous {
            None => vec![None],
            Some((_, cm, cn)) => {
                for (l, c) in [(lm, *cm), (ln, *cn)] {
                    l.check(c).map_err(|message| HierarchyError::BadLevel { level, message })?;
                }
                rings.iter().map(|&r| Some(r)).collect()
            }
        };
        let mut solved = None;
        for ring in ladder {
            let allowed = match (&previous, ring) {
                (Some((coarse, cm, cn)), Some(r)) => {
                    allowed_pairs(&coarse.vertex_pairs, (*cm, *cn), lm, ln, r)
                }
                _ => AllowedPairs::all(lm.mesh.num_vertices(), ln.mesh.num_vertices()),
            };
            let built = build_matching_filtered(&lm.mesh, &ln.mesh, &feat.m, &feat.n, |a, b| allowed.contains(a, b));
            let (ps, program) = match built {
                Ok(v) => v,
                Err(SolveError::Product(ProductError::PrunedInfeasible(_))) if ring.is_some() => continue,
                Err(source) => return Err(HierarchyError::Solve { level, source }),
            };
            let out = solve(&program.instance, cfg).map_err(|source| HierarchyError::Solve { level, source })?;
            let Some(x) = out.assignment.clone() else { continue };
            let matching = decode_matching(&x, &ps, &program, &feat.m, &feat.n)
                .map_err(|e| HierarchyError::Solve { level, source: e.into() })?;
            levels.push(LevelReport {
                level,
                ring,
                num_triangles: (lm.mesh.num_triangles(), ln.mesh.num_triangles()),
                num_variables: ps.len(),
                report: out.report,
                iterations: out.iterations,
                seconds: out.dual_seconds,
            });
            solved = Some((ps, x, matching));
            break;
        }
        let Some((ps, x, matching)) = solved else {
            return Err(HierarchyError::NoSolution {
                level,
                rings: if previous.is_some() { rings.to_vec() } else { Vec::new() },
            });
        };
        previous = Some((matching.clone(), lm.mesh.num_vertices(), ln.mesh.num_vertices()));
        last = Some((ps, x, matching));
    }
    let (space, assignment, matching) = last.expect("at least one level");
    Ok(HierarchyResult {
        levels,
        space,
        assignment,
        matching,
    })
}
