//! Python bindings: problem generation and I/O, solving with any registered
//! method, evaluation and the exact assignment solver.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hippi::assignment::{lap_exact, ProjectionMethod, ScoreBlock};
use hippi::config::RunConfig;
use hippi::evaluation::{cycle_error, evaluate_assignment};
use hippi::formats::{self, MatchingFile};
use hippi::pipeline::solve_problem;
use hippi::solver::UniverseSizeRule;
use hippi::synthgen::{generate as gen_problem, planted_assignment, GenConfig, TransformFamily};
use hippi::{BlockIndex, ProblemInstance, UniverseAssignment};

fn to_py(e: hippi::Error) -> PyErr {
    if e.is_solver_failure() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// A multi-matching problem: objects with points, features and optional
/// ground-truth labels.
#[pyclass(name = "Problem", module = "hippi_py", skip_from_py_object)]
#[derive(Clone)]
struct PyProblem(ProblemInstance);

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        formats::problem_from_str(text).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        formats::read_problem(path.as_ref())
            .map(Self)
            .map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        formats::problem_to_string(&self.0).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        formats::write_problem(path.as_ref(), &self.0).map_err(to_py)
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.0.sizes()
    }

    #[getter]
    fn num_objects(&self) -> usize {
        self.0.num_objects()
    }

    #[getter]
    fn total_points(&self) -> usize {
        self.0.total_points()
    }

    #[getter]
    fn has_ground_truth(&self) -> bool {
        self.0.has_ground_truth()
    }

    /// Points of object `i` as a list of coordinate lists.
    fn points(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        self.check(i).map(|_| self.0.object(i).points.clone())
    }

    fn features(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        self.check(i).map(|_| self.0.object(i).features.clone())
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(k={}, m={}, ground_truth={})",
            self.0.num_objects(),
            self.0.total_points(),
            self.0.has_ground_truth()
        )
    }
}

impl PyProblem {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.0.num_objects() {
            return Err(PyValueError::new_err(format!(
                "object {i} out of range for {} objects",
                self.0.num_objects()
            )));
        }
        Ok(())
    }
}

/// Object-to-universe assignment: `assignment[g]` is the universe column of
/// global point `g`.
#[pyclass(name = "Assignment", module = "hippi_py", skip_from_py_object)]
#[derive(Clone)]
struct PyAssignment(UniverseAssignment);

#[pymethods]
impl PyAssignment {
    #[new]
    fn new(assignment: Vec<usize>, d: usize, sizes: Vec<usize>) -> PyResult<Self> {
        let index = BlockIndex::from_sizes(&sizes).map_err(to_py)?;
        UniverseAssignment::new(assignment, d, index)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        formats::assignment_from_str(text).map(Self).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        formats::assignment_to_string(&self.0).map_err(to_py)
    }

    #[getter]
    fn assignment(&self) -> Vec<usize> {
        self.0.assignment().to_vec()
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.universe_size()
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.0.index().sizes()
    }

    /// Matched cross-object pairs `(g, h)` of global indices with `g < h`.
    fn pairs(&self) -> Vec<(usize, usize)> {
        let a = self.0.assignment();
        let index = self.0.index();
        let mut out = Vec::new();
        for g in 0..a.len() {
            for h in g + 1..a.len() {
                let same_object = index.global_to_local(g).map(|x| x.0).ok()
                    == index.global_to_local(h).map(|x| x.0).ok();
                if a[g] == a[h] && !same_object {
                    out.push((g, h));
                }
            }
        }
        out
    }

    fn cycle_error(&self) -> f64 {
        cycle_error(&self.0.expand())
    }

    fn __repr__(&self) -> String {
        format!(
            "Assignment(m={}, d={})",
            self.0.assignment().len(),
            self.0.universe_size()
        )
    }
}

/// Generates a synthetic problem with planted ground truth.
#[pyfunction]
#[pyo3(signature = (
    k = 5, d_true = 10, visibility = 1.0, coord_noise_sigma = 0.0, feature_dim = 8,
    feature_noise_sigma = 0.0, outlier_fraction = 0.0, feature_prototypes = None,
    transform = "rigid", seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn generate(
    k: usize,
    d_true: usize,
    visibility: f64,
    coord_noise_sigma: f64,
    feature_dim: usize,
    feature_noise_sigma: f64,
    outlier_fraction: f64,
    feature_prototypes: Option<usize>,
    transform: &str,
    seed: u64,
) -> PyResult<PyProblem> {
    let transform_family = match transform {
        "rigid" => TransformFamily::Rigid,
        "similarity" => TransformFamily::Similarity,
        "none" => TransformFamily::None,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown transform {other:?}; expected rigid, similarity or none"
            )))
        }
    };
    let cfg = GenConfig {
        k,
        d_true,
        visibility,
        coord_noise_sigma,
        feature_dim,
        feature_noise_sigma,
        outlier_fraction,
        feature_prototypes,
        transform_family,
        seed,
        ..Default::default()
    };
    gen_problem(&cfg).map(PyProblem).map_err(to_py)
}

/// Runs a matching method. Returns a dict with the assignment, the
/// objective sequence and report fields (scores only with ground truth).
#[pyfunction]
#[pyo3(signature = (
    problem, method = "hippi", init = "greedy", sigma = 1.0, mu = 1.0, self_weight = 0.0,
    d = None, max_iters = 200, projection = "exact", seed = 0, strict_psd = false
))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    method: &str,
    init: &str,
    sigma: f64,
    mu: f64,
    self_weight: f64,
    d: Option<usize>,
    max_iters: usize,
    projection: &str,
    seed: u64,
    strict_psd: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = RunConfig {
        seed: Some(seed),
        method: method.parse().map_err(to_py)?,
        init: init.parse().map_err(to_py)?,
        ..Default::default()
    };
    if matches!(cfg.method, hippi::Method::External(_)) {
        return Err(PyValueError::new_err(
            "external methods are imported through the command-line tool",
        ));
    }
    cfg.kernel.sigma = sigma;
    cfg.kernel.mu = mu;
    cfg.kernel.self_weight = self_weight;
    cfg.solver.max_iters = max_iters;
    cfg.solver.projection = projection.parse::<ProjectionMethod>().map_err(to_py)?;
    cfg.solver.strict_psd = strict_psd;
    if let Some(d) = d {
        cfg.solver.universe_size = UniverseSizeRule::Explicit(d);
    }
    cfg.validate().map_err(to_py)?;
    let outcome = py
        .detach(|| solve_problem(&cfg, &problem.0))
        .map_err(to_py)?;
    let u = match outcome.result {
        MatchingFile::Assignment(u) => u,
        MatchingFile::Matchings(_) => unreachable!("only external methods return matchings"),
    };
    let out = PyDict::new(py);
    out.set_item("assignment", PyAssignment(u))?;
    out.set_item("objectives", outcome.trace.objectives)?;
    out.set_item("iterations", outcome.report.iterations)?;
    out.set_item("converged", outcome.trace.converged)?;
    out.set_item("precision", outcome.report.precision)?;
    out.set_item("recall", outcome.report.recall)?;
    out.set_item("fscore", outcome.report.fscore)?;
    out.set_item("cycle_error", outcome.report.cycle_error)?;
    out.set_item("runtime_seconds", outcome.report.runtime_seconds)?;
    Ok(out)
}

/// Precision, recall, fscore and cycle error against the ground truth.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    assignment: &PyAssignment,
) -> PyResult<Bound<'py, PyDict>> {
    let truth = problem
        .0
        .ground_truth()
        .ok_or_else(|| PyValueError::new_err("problem has no ground truth"))?;
    let r = evaluate_assignment(&assignment.0, &truth).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("precision", r.precision)?;
    out.set_item("recall", r.recall)?;
    out.set_item("fscore", r.fscore)?;
    out.set_item("cycle_error", r.cycle_error)?;
    Ok(out)
}

/// The ground-truth assignment of a generated problem with `d` columns.
#[pyfunction]
fn planted(problem: &PyProblem, d: usize) -> PyResult<PyAssignment> {
    planted_assignment(&problem.0, d)
        .map(PyAssignment)
        .map_err(to_py)
}

/// Maximum-score assignment of each row to a distinct column.
#[pyfunction]
fn lap(scores: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    let block = ScoreBlock::from_rows(&scores).map_err(to_py)?;
    lap_exact(&block).map_err(to_py)
}

#[pymodule]
fn hippi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyAssignment>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(planted, m)?)?;
    m.add_function(wrap_pyfunction!(lap, m)?)?;
    Ok(())
}
