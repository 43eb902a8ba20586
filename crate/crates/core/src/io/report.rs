use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_text, IoError};
use crate::product::{Matching, VertexPair};
use crate::solver::LogRow;

pub const CONVERGENCE_HEADER: &str =
    "time_s,iteration,kind,dual_objective,relative_dual_gap,primal_objective,primal_dual_gap";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// CSV rendering. With `with_time = false` the time column is left empty so
/// that logs of different runs compare byte for byte.
pub fn render_convergence_log(rows: &[LogRow], with_time: bool) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for r in rows {
        let time = if with_time { format!("{:.6}", r.time_s) } else { String::new() };
        let _ = writeln!(
            s,
            "{time},{},{},{:?},{},{},{}",
            r.iteration,
            r.kind.as_str(),
            r.dual_objective,
            opt(r.relative_dual_gap),
            opt(r.primal_objective),
            opt(r.primal_dual_gap)
        );
    }
    s
}

pub fn write_convergence_log(rows: &[LogRow], path: &Path, with_time: bool) -> Result<(), IoError> {
    write_text(path, &render_convergence_log(rows, with_time))
}

/// Result of `solve-ilp` and `oracle`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IlpSolutionFile {
    pub feasible: bool,
    pub objective: Option<f64>,
    pub best_dual: Option<f64>,
    pub gap: Option<f64>,
    pub certified: bool,
    pub num_vars: usize,
    /// Variables set to one.
    pub ones: Vec<usize>,
}

impl IlpSolutionFile {
    pub fn assignment(&self) -> Vec<bool> {
        let mut x = vec![false; self.num_vars];
        for &i in &self.ones {
            if i < x.len() {
                x[i] = true;
            }
        }
        x
    }
}

/// Result of `match` and `c2f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchSolutionFile {
    pub objective: f64,
    pub best_dual: f64,
    pub gap: f64,
    pub certified: bool,
    pub num_product_triangles: usize,
    pub selected: Vec<usize>,
    pub vertex_pairs: Vec<VertexPair>,
    pub point_map: Vec<Option<usize>>,
}

impl MatchSolutionFile {
    pub fn new(objective: f64, best_dual: f64, gap: f64, certified: bool, num: usize, m: &Matching) -> Self {
        MatchSolutionFile {
            objective,
            best_dual,
            gap,
            certified,
            num_product_triangles: num,
            selected: m.selected.clone(),
            vertex_pairs: m.vertex_pairs.clone(),
            point_map: m.point_map.clone(),
        }
    }
}
