use std::path::PathBuf;
use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dualmatch::mesh::{shapes, FeatureMatrix};
use dualmatch::primal::{exact_solve, ExactConfig, ExactResult};
use dualmatch::product::{build_matching, decode_matching, enumerate_product_triangles};
use dualmatch::solver::{solve, SolveConfig, SolveMode};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Reduced ordered decision diagram of one constraint.
#[pyclass(name = "Bdd", module = "dualmatch_py", frozen)]
struct PyBdd {
    inner: dualmatch::Bdd,
}

#[pymethods]
impl PyBdd {
    /// Diagram of `sum coeffs[k] * x[variables[k]] == rhs`.
    #[staticmethod]
    fn equality(coeffs: Vec<i64>, rhs: i64, variables: Vec<usize>) -> PyResult<Self> {
        if coeffs.len() != variables.len() {
            return Err(value_err("coeffs and variables differ in length"));
        }
        let inner = dualmatch::Bdd::equality(&coeffs, rhs, &variables).map_err(value_err)?;
        Ok(PyBdd { inner })
    }

    #[getter]
    fn variables(&self) -> Vec<usize> {
        self.inner.variables().to_vec()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    fn layer_widths(&self) -> Vec<usize> {
        self.inner.layer_widths()
    }

    fn count_paths(&self) -> u128 {
        self.inner.count_accepting_paths()
    }

    /// `assignment` is indexed by layer.
    fn accepts(&self, assignment: Vec<bool>) -> PyResult<bool> {
        if assignment.len() != self.inner.num_layers() {
            return Err(value_err("assignment length must equal the number of layers"));
        }
        Ok(self.inner.accepts(&assignment))
    }

    /// Cheapest accepted assignment under per-layer costs.
    fn min_assignment(&self, costs: Vec<f64>) -> PyResult<(f64, Vec<bool>)> {
        self.check_costs(&costs)?;
        Ok(self.inner.min_assignment(&costs))
    }

    /// Per layer `(m0, m1)`; `None` where the value is infeasible.
    fn min_marginals(&self, costs: Vec<f64>) -> PyResult<Vec<(Option<f64>, Option<f64>)>> {
        self.check_costs(&costs)?;
        Ok(self.inner.min_marginals(&costs).into_iter().map(|p| (p.m0, p.m1)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Bdd(layers={}, nodes={})", self.inner.num_layers(), self.inner.num_nodes())
    }
}

impl PyBdd {
    fn check_costs(&self, costs: &[f64]) -> PyResult<()> {
        if costs.len() != self.inner.num_layers() {
            return Err(value_err("need one cost per layer"));
        }
        Ok(())
    }
}

/// 0-1 program with equality rows.
#[pyclass(name = "IlpInstance", module = "dualmatch_py", frozen)]
struct PyInstance {
    inner: dualmatch::IlpInstance,
}

#[pymethods]
impl PyInstance {
    /// `rows` holds `(terms, rhs)` with `terms = [(variable, coefficient), ...]`.
    #[new]
    fn new(costs: Vec<f64>, rows: Vec<(Vec<(usize, i64)>, i64)>) -> PyResult<Self> {
        let rows = rows
            .into_iter()
            .map(|(t, rhs)| dualmatch::LinearRow::new(t, rhs))
            .collect();
        let inner = dualmatch::IlpInstance::from_rows(costs, rows).map_err(value_err)?;
        Ok(PyInstance { inner })
    }

    #[staticmethod]
    fn read_lp(path: PathBuf) -> PyResult<Self> {
        let inner = dualmatch::io::read_lp(&path).map_err(value_err)?;
        Ok(PyInstance { inner })
    }

    fn write_lp(&self, path: PathBuf) -> PyResult<()> {
        dualmatch::io::write_lp(&self.inner, &path).map_err(value_err)
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.inner.num_vars()
    }

    #[getter]
    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }

    #[getter]
    fn costs(&self) -> Vec<f64> {
        self.inner.costs().to_vec()
    }

    fn objective(&self, x: Vec<bool>) -> PyResult<f64> {
        if x.len() != self.inner.num_vars() {
            return Err(value_err("wrong assignment length"));
        }
        Ok(self.inner.objective(&x))
    }

    fn is_feasible(&self, x: Vec<bool>) -> bool {
        self.inner.is_feasible(&x)
    }

    fn __repr__(&self) -> String {
        format!(
            "IlpInstance(num_vars={}, num_constraints={})",
            self.inner.num_vars(),
            self.inner.num_constraints()
        )
    }
}

/// Closed triangle mesh.
#[pyclass(name = "Mesh", module = "dualmatch_py", frozen)]
struct PyMesh {
    inner: dualmatch::Mesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Self {
        PyMesh {
            inner: dualmatch::Mesh::new(vertices, triangles),
        }
    }

    /// ASCII OFF or PLY.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let inner = dualmatch::io::read_mesh(&path).map_err(value_err)?;
        Ok(PyMesh { inner })
    }

    /// `tetra`, `octa`, `icosa`, `icosphere` (uses `a` as level),
    /// `uv` (`a` slices, `b` stacks) or `torus` (`a` x `b`).
    #[staticmethod]
    #[pyo3(signature = (name, a = 1, b = 1))]
    fn shape(name: &str, a: usize, b: usize) -> PyResult<Self> {
        let inner = match name {
            "tetra" => shapes::tetrahedron(),
            "octa" => shapes::octahedron(),
            "icosa" => shapes::icosahedron(),
            "icosphere" => shapes::icosphere(a),
            "uv" if a >= 3 && b >= 2 => shapes::uv_sphere(a, b),
            "torus" if a >= 3 && b >= 3 => shapes::torus(a, b),
            _ => return Err(value_err(format!("unknown shape or bad size: {name}({a}, {b})"))),
        };
        Ok(PyMesh { inner })
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices.clone()
    }

    #[getter]
    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles.clone()
    }

    /// Genus; raises if the mesh is not closed and manifold.
    fn genus(&self) -> PyResult<i64> {
        Ok(self.inner.validate("mesh").map_err(value_err)?.genus)
    }

    fn mixed_vertex_areas(&self) -> PyResult<Vec<f64>> {
        self.inner.mixed_vertex_areas().map_err(value_err)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        dualmatch::io::write_mesh(&self.inner, &path).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(vertices={}, triangles={})",
            self.inner.num_vertices(),
            self.inner.num_triangles()
        )
    }
}

fn config(mode: &str, chunk_size: usize, max_iterations: usize, threads: usize) -> PyResult<SolveConfig> {
    let mode: SolveMode = mode.parse().map_err(value_err)?;
    Ok(SolveConfig {
        mode,
        chunk_size,
        max_iterations,
        threads,
        ..SolveConfig::default()
    })
}

/// Dual ascent plus rounding. Returns a dict with `assignment` (or None),
/// `objective`, `best_dual`, `gap`, `certified`, `iterations`,
/// `qn_steps` and `dual_log`.
#[pyfunction]
#[pyo3(signature = (instance, mode = "hybrid", chunk_size = 128, max_iterations = 500, threads = 0))]
fn solve_ilp<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    mode: &str,
    chunk_size: usize,
    max_iterations: usize,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(mode, chunk_size, max_iterations, threads)?;
    let out = py
        .detach(|| solve(&instance.inner, &cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let d = PyDict::new(py);
    d.set_item("assignment", out.assignment.clone())?;
    d.set_item("objective", out.report.map(|r| r.primal_objective))?;
    d.set_item("best_dual", out.best_dual)?;
    d.set_item("gap", out.report.map(|r| r.primal_dual_gap))?;
    d.set_item("certified", out.is_certified())?;
    d.set_item("iterations", out.iterations)?;
    d.set_item("qn_steps", out.qn_steps)?;
    let log: Vec<f64> = out
        .log
        .iter()
        .filter(|r| r.kind != dualmatch::solver::IterationKind::Primal)
        .map(|r| r.dual_objective)
        .collect();
    d.set_item("dual_log", log)?;
    Ok(d)
}

/// Exact branch and bound. Returns `(x, objective)`, or None if infeasible.
#[pyfunction]
#[pyo3(signature = (instance, time_limit = 60.0))]
fn exact(py: Python<'_>, instance: &PyInstance, time_limit: f64) -> PyResult<Option<(Vec<bool>, f64)>> {
    let cfg = ExactConfig {
        time_limit: Duration::from_secs_f64(time_limit),
        ..ExactConfig::default()
    };
    match py.detach(|| exact_solve(&instance.inner, &cfg)) {
        ExactResult::Optimal { x, objective } => Ok(Some((x, objective))),
        ExactResult::Infeasible => Ok(None),
        ExactResult::TimedOut { .. } => Err(PyRuntimeError::new_err("time limit reached")),
    }
}

/// Product triangle count and `|P| / (|T_M| |T_N|)`.
#[pyfunction]
fn product_space_size(m: &PyMesh, n: &PyMesh) -> (usize, f64) {
    let ps = enumerate_product_triangles(&m.inner, &n.inner);
    (ps.len(), ps.ratio())
}

fn features(mesh: &dualmatch::Mesh, rows: Option<Vec<Vec<f64>>>) -> PyResult<FeatureMatrix> {
    match rows {
        Some(r) => FeatureMatrix::from_rows(&r).map_err(value_err),
        None => Ok(FeatureMatrix::from_positions(mesh)),
    }
}

/// Matches two meshes. Features default to vertex positions. Returns a
/// dict with `objective`, `best_dual`, `gap`, `certified`, `selected`,
/// `vertex_pairs`, `point_map` and `num_product_triangles`.
#[pyfunction]
#[pyo3(signature = (m, n, features_m = None, features_n = None, mode = "hybrid", max_iterations = 500, threads = 0))]
#[allow(clippy::too_many_arguments)]
fn match_meshes<'py>(
    py: Python<'py>,
    m: &PyMesh,
    n: &PyMesh,
    features_m: Option<Vec<Vec<f64>>>,
    features_n: Option<Vec<Vec<f64>>>,
    mode: &str,
    max_iterations: usize,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let fm = features(&m.inner, features_m)?;
    let fnn = features(&n.inner, features_n)?;
    let cfg = config(mode, 128, max_iterations, threads)?;
    let (ps, program, out) = py
        .detach(|| -> Result<_, String> {
            let (ps, program) = build_matching(&m.inner, &n.inner, &fm, &fnn).map_err(|e| e.to_string())?;
            let out = solve(&program.instance, &cfg).map_err(|e| e.to_string())?;
            Ok((ps, program, out))
        })
        .map_err(PyValueError::new_err)?;
    let d = PyDict::new(py);
    d.set_item("num_product_triangles", ps.len())?;
    d.set_item("best_dual", out.best_dual)?;
    d.set_item("certified", out.is_certified())?;
    match (&out.assignment, &out.report) {
        (Some(x), Some(r)) => {
            let matching = decode_matching(x, &ps, &program, &fm, &fnn).map_err(value_err)?;
            d.set_item("objective", r.primal_objective)?;
            d.set_item("gap", r.primal_dual_gap)?;
            d.set_item("selected", matching.selected)?;
            d.set_item("vertex_pairs", matching.vertex_pairs)?;
            d.set_item("point_map", matching.point_map)?;
        }
        _ => {
            d.set_item("objective", py.None())?;
            d.set_item("gap", py.None())?;
        }
    }
    Ok(d)
}

#[pymodule]
fn dualmatch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBdd>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyMesh>()?;
    m.add_function(wrap_pyfunction!(solve_ilp, m)?)?;
    m.add_function(wrap_pyfunction!(exact, m)?)?;
    m.add_function(wrap_pyfunction!(product_space_size, m)?)?;
    m.add_function(wrap_pyfunction!(match_meshes, m)?)?;
    Ok(())
}
