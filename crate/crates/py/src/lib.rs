//! Python module `boundprop`: networks, generators, bound propagation and
//! the exact oracles.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOverflowError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

use boundprop::engine::estimate_alpha;
use boundprop::io;
use boundprop::lp::{self, Constraint, LpProblem, LpStatus, Sense};
use boundprop::netgen::{self, RingProfile};
use boundprop::oracle::{self, DEFAULT_STATE_CAP};
use boundprop::{BoundsStore, ConvergenceReport, Error, Evidence, Factor, PropagationConfig, VarSet};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::StateSpaceExceeded { .. } => PyOverflowError::new_err(e.to_string()),
        Error::Soundness(_)
        | Error::Infeasible { .. }
        | Error::Unbounded
        | Error::IterationLimit(_)
        | Error::NoConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn set_key<'py>(py: Python<'py>, set: &[usize]) -> PyResult<Bound<'py, PyTuple>> {
    PyTuple::new(py, set)
}

fn evidence_from(map: BTreeMap<usize, usize>) -> PyResult<Evidence> {
    Evidence::from_pairs(map).map_err(to_py)
}

/// A discrete factor graph.
#[pyclass(name = "Network", module = "boundprop", frozen, skip_from_py_object)]
pub struct PyNetwork {
    inner: boundprop::Network,
}

#[pymethods]
impl PyNetwork {
    /// `factors` is a list of `(scope, table)` pairs; tables list the last
    /// scope variable fastest.
    #[new]
    fn new(cardinalities: Vec<usize>, factors: Vec<(Vec<usize>, Vec<f64>)>) -> PyResult<Self> {
        let factors = factors.into_iter().map(|(s, t)| Factor::new(s, t)).collect();
        boundprop::Network::new(cardinalities, factors)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_uai(text: &str) -> PyResult<Self> {
        io::parse_uai(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_uai(&self) -> String {
        io::write_uai(&self.inner)
    }

    /// Spin ring with constant coupling `w` and field `theta`.
    #[staticmethod]
    fn ring(n: usize, w: f64, theta: f64) -> PyResult<Self> {
        netgen::gen_ring(n, RingProfile::Constant { w, theta })
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Spin ring whose coupling and field vary smoothly along the ring.
    #[staticmethod]
    fn varying_ring(n: usize) -> PyResult<Self> {
        netgen::gen_ring(n, RingProfile::Fig3Like)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (rows, cols, seed=0))]
    fn grid(rows: usize, cols: usize, seed: u64) -> PyResult<Self> {
        netgen::gen_ising_grid(rows, cols, seed)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Returns `(network, evidence)` with evidence as `{variable: state}`.
    #[staticmethod]
    #[pyo3(signature = (n, seed=0, evidence_every=0))]
    fn bipartite(n: usize, seed: u64, evidence_every: usize) -> PyResult<(Self, BTreeMap<usize, usize>)> {
        let (inner, ev) = netgen::gen_bipartite(n, seed, evidence_every).map_err(to_py)?;
        Ok((Self { inner }, ev.iter().collect()))
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.inner.num_vars()
    }

    #[getter]
    fn cardinalities(&self) -> Vec<usize> {
        self.inner.cardinalities().to_vec()
    }

    fn factors(&self) -> Vec<(Vec<usize>, Vec<f64>)> {
        self.inner
            .factors()
            .iter()
            .map(|f| (f.scope().to_vec(), f.table().to_vec()))
            .collect()
    }

    fn markov_blanket(&self, vars: Vec<usize>) -> Vec<usize> {
        let mut vars = vars;
        vars.sort_unstable();
        vars.dedup();
        self.inner.markov_blanket(&vars)
    }

    /// Clamps observed variables. Returns `(reduced, new_to_old)`.
    fn condition(&self, evidence: BTreeMap<usize, usize>) -> PyResult<(Self, Vec<usize>)> {
        let reduced = boundprop::apply_evidence(&self.inner, &evidence_from(evidence)?).map_err(to_py)?;
        if reduced.zero_weight {
            return Err(PyValueError::new_err("evidence has zero probability"));
        }
        Ok((Self { inner: reduced.network }, reduced.new_to_old))
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(num_vars={}, factors={})",
            self.inner.num_vars(),
            self.inner.factors().len()
        )
    }
}

/// Bounds and convergence history from one `propagate` call.
#[pyclass(name = "PropagationResult", module = "boundprop", frozen)]
pub struct PyPropagationResult {
    store: BoundsStore,
    report: ConvergenceReport,
}

#[pymethods]
impl PyPropagationResult {
    /// `{vars: (lower, upper)}` keyed by sorted variable tuples.
    fn bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for (set, e) in self.store.iter() {
            out.set_item(set_key(py, set)?, (e.lower.clone(), e.upper.clone()))?;
        }
        Ok(out)
    }

    /// `(lower, upper)` for one variable set, or None when it was not bounded.
    fn get(&self, vars: Vec<usize>) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut vars = vars;
        vars.sort_unstable();
        self.store.get(&vars).map(|e| (e.lower.clone(), e.upper.clone()))
    }

    #[getter]
    fn sweeps(&self) -> usize {
        self.report.sweeps.len()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.report.converged
    }

    /// Total gap per sweep, summed over entries.
    #[getter]
    fn total_gaps(&self) -> Vec<f64> {
        self.report.sweeps.iter().map(|s| s.total_gap).collect()
    }

    fn gap_history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for (set, gaps) in &self.report.gap_history {
            out.set_item(set_key(py, set)?, gaps.clone())?;
        }
        Ok(out)
    }

    /// Per-entry convergence rate `{vars: (alpha, reliable)}`; entries
    /// without enough history map to None.
    fn alpha<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for (set, est) in estimate_alpha(&self.report) {
            let value = est.ok().map(|a| (a.alpha, a.reliable));
            out.set_item(set_key(py, &set)?, value)?;
        }
        Ok(out)
    }

    /// Fraction of single-variable entries whose band is narrower than 0.1.
    fn fraction_narrow(&self) -> f64 {
        io::BoundsReport::from_store(&self.store, None, None)
            .summary()
            .fraction_single_below_0_1
    }

    /// CSV report; `names` maps internal variable indices to output ones.
    #[pyo3(signature = (names=None))]
    fn to_csv(&self, names: Option<Vec<usize>>) -> PyResult<String> {
        let report = io::BoundsReport::from_store(&self.store, names.as_deref(), None);
        io::write_report(&report, io::ReportFormat::Csv).map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(signature = (net, omega=vec![256], mar_cap=16, tol=0.01, max_sweeps=1000, max_rows=20000, parallel=false))]
#[allow(clippy::too_many_arguments)]
fn propagate(
    py: Python<'_>,
    net: &PyNetwork,
    omega: Vec<u128>,
    mar_cap: u128,
    tol: f64,
    max_sweeps: usize,
    max_rows: usize,
    parallel: bool,
) -> PyResult<PyPropagationResult> {
    let cfg = PropagationConfig {
        omega_schedule: omega,
        mar_state_cap: mar_cap,
        convergence_threshold: tol,
        max_sweeps,
        max_rows,
        parallel,
        ..PropagationConfig::default()
    };
    let inner = &net.inner;
    let (store, report) = py
        .detach(|| boundprop::propagate(inner, &cfg))
        .map_err(to_py)?;
    Ok(PyPropagationResult { store, report })
}

/// Brute-force marginals `{vars: probabilities}`; all single variables by default.
#[pyfunction]
#[pyo3(signature = (net, sets=None, cap=None))]
fn exact_marginals<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    sets: Option<Vec<Vec<usize>>>,
    cap: Option<u128>,
) -> PyResult<Bound<'py, PyDict>> {
    let sets: Vec<VarSet> = match sets {
        Some(sets) => sets
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect(),
        None => oracle::single_sets(&net.inner),
    };
    let inner = &net.inner;
    let cap = cap.unwrap_or(DEFAULT_STATE_CAP);
    let exact = py
        .detach(|| oracle::exact_marginals(inner, &sets, cap))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    for (set, p) in &exact.marginals {
        out.set_item(set_key(py, set)?, p.clone())?;
    }
    Ok(out)
}

/// Fixed point of the homogeneous ring bound map.
#[pyfunction]
#[pyo3(signature = (w, theta, tol=1e-10, max_iterations=1_000_000))]
fn ring_fixed_point<'py>(py: Python<'py>, w: f64, theta: f64, tol: f64, max_iterations: usize) -> PyResult<Bound<'py, PyDict>> {
    let fp = oracle::ring_fixed_point(w, theta, tol, max_iterations).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mean_upper", fp.mean_upper)?;
    out.set_item("mean_lower", fp.mean_lower)?;
    out.set_item("p_upper", fp.p_upper)?;
    out.set_item("p_lower", fp.p_lower)?;
    out.set_item("gap", fp.gap())?;
    out.set_item("alpha", fp.alpha)?;
    out.set_item("alpha_reliable", fp.alpha_reliable)?;
    out.set_item("iterations", fp.iterations)?;
    Ok(out)
}

/// Clusters under a state-space budget as `(interior, separator, state_space)`.
#[pyfunction]
fn clusters(net: &PyNetwork, budget: u128) -> Vec<(Vec<usize>, Vec<usize>, u128)> {
    boundprop::enumerate_clusters(&net.inner, budget)
        .clusters
        .into_iter()
        .map(|c| (c.interior, c.separator, c.state_space))
        .collect()
}

/// Optimizes `objective . x` over `x >= 0, A x <= b`. Returns
/// `(status, value, point)` with status "optimal", "infeasible" or "unbounded".
#[pyfunction]
#[pyo3(signature = (objective, rows, maximize=true))]
fn solve_lp(objective: Vec<f64>, rows: Vec<(Vec<f64>, f64)>, maximize: bool) -> PyResult<(String, f64, Vec<f64>)> {
    let n = objective.len();
    if let Some((a, _)) = rows.iter().find(|(a, _)| a.len() != n) {
        return Err(PyValueError::new_err(format!("row of length {} for {n} variables", a.len())));
    }
    let problem = LpProblem {
        num_vars: n,
        objective,
        rows: rows.into_iter().map(|(coeffs, rhs)| Constraint { coeffs, rhs }).collect(),
        sense: if maximize { Sense::Maximize } else { Sense::Minimize },
    };
    let sol = lp::solve_lp(&problem).map_err(to_py)?;
    let status = match sol.status {
        LpStatus::Optimal => "optimal",
        LpStatus::Infeasible => "infeasible",
        LpStatus::Unbounded => "unbounded",
    };
    Ok((status.to_string(), sol.value, sol.point))
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyPropagationResult>()?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_marginals, m)?)?;
    m.add_function(wrap_pyfunction!(ring_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(clusters, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add("DEFAULT_STATE_CAP", DEFAULT_STATE_CAP)?;
    Ok(())
}

#[pymodule]
#[pyo3(name = "boundprop")]
fn boundprop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
