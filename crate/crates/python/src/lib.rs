//! Python bindings for `qmem_core`.

use num_bigint::BigUint;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qmem_core::coding::{self, Channel};
use qmem_core::entropy::{self, DiagonalState};
use qmem_core::report::{Status, Verdict};
use qmem_core::{largedev, packing, Error, Shape};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::BudgetExceeded(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Holds => "holds",
        Status::Violated => "violated",
        Status::Marginal => "marginal",
    }
}

/// A verdict as `(status, margin, witness_p)`.
fn verdict_tuple(v: Verdict) -> (&'static str, f64, f64) {
    (status_name(v.status), v.margin, v.witness_p)
}

/// Block sizes with multiplicities of a finite-dimensional C*-algebra.
#[pyclass(name = "Shape", module = "qmem", frozen, skip_from_py_object, eq)]
#[derive(Clone, PartialEq)]
struct PyShape(Shape);

#[pymethods]
impl PyShape {
    #[new]
    fn new(parts: Vec<u64>) -> PyResult<Self> {
        Shape::new(&parts).map(PyShape).map_err(py_err)
    }

    /// Parses `"2,1,1"`.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        qmem_core::parse_shape(text).map(PyShape).map_err(py_err)
    }

    /// `(size, multiplicity)` pairs, largest size first.
    fn parts(&self) -> Vec<(BigUint, BigUint)> {
        self.0.parts_desc().map(|(s, m)| (s.clone(), m.clone())).collect()
    }

    fn total(&self) -> BigUint {
        self.0.total()
    }

    fn max_part(&self) -> BigUint {
        self.0.max_part().clone()
    }

    fn log_p_norm(&self, p: f64) -> PyResult<f64> {
        self.0.log_p_norm(p).map_err(py_err)
    }

    fn tensor(&self, other: &PyShape) -> PyShape {
        PyShape(self.0.tensor(&other.0))
    }

    fn tensor_power(&self, n: u64) -> PyShape {
        PyShape(self.0.tensor_power(n))
    }

    fn __repr__(&self) -> String {
        format!("Shape({})", self.0)
    }
}

/// Diagonal state: per-block eigenvalue lists.
#[pyclass(name = "DiagonalState", module = "qmem", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState(DiagonalState);

#[pymethods]
impl PyState {
    #[new]
    fn new(shape: &PyShape, entries: Vec<Vec<f64>>) -> PyResult<Self> {
        entropy::make_state(&shape.0, entries).map(PyState).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        DiagonalState::from_json(text).map(PyState).map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn shape(&self) -> PyShape {
        PyShape(self.0.shape())
    }

    /// `(size, weights)` per block, largest block first.
    fn blocks(&self) -> Vec<(u64, Vec<f64>)> {
        self.0.blocks().iter().map(|b| (b.size, b.weights.clone())).collect()
    }

    fn classical_entropy(&self) -> f64 {
        entropy::classical_entropy(&self.0)
    }

    fn quantum_entropy(&self) -> f64 {
        entropy::quantum_entropy(&self.0)
    }

    fn total_entropy(&self) -> f64 {
        entropy::total_entropy(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("DiagonalState({})", self.0.to_json())
    }
}

/// Block-structured quantum channel given by Kraus operators.
#[pyclass(name = "Channel", module = "qmem", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChannel(Channel);

#[pymethods]
impl PyChannel {
    #[staticmethod]
    fn identity(shape: &PyShape) -> PyResult<Self> {
        Channel::identity(&shape.0).map(PyChannel).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (input, output, rank = 1, seed = 0))]
    fn random(input: &PyShape, output: &PyShape, rank: usize, seed: u64) -> PyResult<Self> {
        coding::random_subunital_channel(&input.0, &output.0, rank, seed)
            .map(PyChannel)
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Channel::from_json(text).map(PyChannel).map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn is_subunital(&self) -> bool {
        self.0.is_subunital()
    }

    fn kraus_count(&self) -> usize {
        self.0.kraus().len()
    }
}

#[pyfunction]
fn supermajorizes(big: &PyShape, small: &PyShape) -> bool {
    qmem_core::supermajorizes(&big.0, &small.0)
}

/// Whether `a` embeds in `b`; `None` when the node budget runs out.
#[pyfunction]
#[pyo3(signature = (a, b, node_budget = packing::DEFAULT_NODE_BUDGET))]
fn decide_embed(a: &PyShape, b: &PyShape, node_budget: u64) -> PyResult<Option<bool>> {
    let search = packing::decide_embed_with_budget(&a.0, &b.0, node_budget).map_err(py_err)?;
    Ok(match search.outcome {
        packing::EmbedOutcome::Embeddable(_) => Some(true),
        packing::EmbedOutcome::NotEmbeddable => Some(false),
        packing::EmbedOutcome::Unknown => None,
    })
}

#[pyfunction]
#[pyo3(signature = (a, b, tol = largedev::DEFAULT_TOL))]
fn bulk_check(a: &PyShape, b: &PyShape, tol: f64) -> (&'static str, f64, f64) {
    verdict_tuple(largedev::bulk_check(&a.0, &b.0, tol))
}

/// `(N, M)` with a verified packing of `a^N` into `b^M`; `epsilon` is `"1/4"` or a decimal.
#[pyfunction]
#[pyo3(signature = (a, b, epsilon = "1/4", n_max = 512))]
fn bulk_construct(a: &PyShape, b: &PyShape, epsilon: &str, n_max: u64) -> PyResult<(u64, u64)> {
    let eps = qmem_core::cli::parse_rational(epsilon).map_err(py_err)?;
    let c = largedev::bulk_construct(&a.0, &b.0, &eps, n_max).map_err(py_err)?;
    Ok((c.n, c.m))
}

/// `ℓ(β)` or its first or second derivative.
#[pyfunction]
#[pyo3(signature = (shape, beta, order = 0))]
fn ell(shape: &PyShape, beta: f64, order: u8) -> PyResult<f64> {
    largedev::ell(&shape.0, beta, order).map_err(py_err)
}

/// `(value, beta)` of the Legendre transform at `t`.
#[pyfunction]
fn legendre(shape: &PyShape, t: f64) -> PyResult<(f64, f64)> {
    largedev::legendre(&shape.0, t).map(|l| (l.value, l.beta)).map_err(py_err)
}

#[pyfunction]
fn log_chernoff_upper(shape: &PyShape, n: u64, t: f64) -> PyResult<f64> {
    largedev::log_chernoff_upper(&shape.0, n, t).map_err(py_err)
}

/// Exact sum of the parts of `shape^n` that are at least `e^{nt}`.
#[pyfunction]
fn exact_tail(shape: &PyShape, n: u64, t: f64) -> PyResult<BigUint> {
    largedev::exact_tail(&shape.0, n, t).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (shape, p = 1.0))]
fn thermal_state(shape: &PyShape, p: f64) -> PyResult<PyState> {
    entropy::thermal_state(&shape.0, p).map(|(s, _)| PyState(s)).map_err(py_err)
}

/// `(H, S)` of the thermal state at exponent `p`.
#[pyfunction]
fn capacity_point(shape: &PyShape, p: f64) -> PyResult<(f64, f64)> {
    entropy::capacity_point(&shape.0, p).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (shape, samples = 256))]
fn region_boundary(shape: &PyShape, samples: usize) -> PyResult<Vec<(f64, f64)>> {
    entropy::region_boundary(&shape.0, samples).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (shape, h, s, tol = largedev::DEFAULT_TOL))]
fn region_contains(shape: &PyShape, h: f64, s: f64, tol: f64) -> (&'static str, f64, f64) {
    verdict_tuple(entropy::region_contains(&shape.0, h, s, tol))
}

/// A state with entropies `(h, s)` and the witness parameter `t`.
#[pyfunction]
fn realize_point(shape: &PyShape, h: f64, s: f64) -> PyResult<(PyState, f64)> {
    entropy::realize_point(&shape.0, h, s)
        .map(|r| (PyState(r.state), r.t))
        .map_err(py_err)
}

#[pyfunction]
fn coding_fidelity(state: &PyState, decode: &PyChannel, encode: &PyChannel) -> PyResult<f64> {
    coding::coding_fidelity(&state.0, &decode.0, &encode.0).map_err(py_err)
}

/// `(bound, best_p)`; minimized over `p` when `p` is `None`.
#[pyfunction]
#[pyo3(signature = (state, b, p = None, n = 1))]
fn holder_bound(state: &PyState, b: &PyShape, p: Option<f64>, n: u64) -> PyResult<(f64, f64)> {
    coding::holder_bound_power(&state.0, &b.0, n, p)
        .map(|h| (h.bound, h.best_p))
        .map_err(py_err)
}

/// `(rate, best_p)` of the fidelity decay through `b`.
#[pyfunction]
#[pyo3(signature = (state, b, delta = 0.0))]
fn nogo_rate(state: &PyState, b: &PyShape, delta: f64) -> PyResult<(f64, f64)> {
    coding::nogo_rate(&state.0, &b.0, delta)
        .map(|r| (r.rate, r.best_p))
        .map_err(py_err)
}

/// `(shape or None, exact probability as "a/b", float probability)`.
#[pyfunction]
fn typical_algebra(state: &PyState, n: u64, alpha: f64) -> PyResult<(Option<PyShape>, String, f64)> {
    let t = coding::typical_algebra(&state.0, n, alpha).map_err(py_err)?;
    Ok((t.shape_typ.map(PyShape), t.prob_typ_exact.to_string(), t.prob_typ))
}

#[pymodule]
fn qmem(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyShape>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyChannel>()?;
    m.add_function(wrap_pyfunction!(supermajorizes, m)?)?;
    m.add_function(wrap_pyfunction!(decide_embed, m)?)?;
    m.add_function(wrap_pyfunction!(bulk_check, m)?)?;
    m.add_function(wrap_pyfunction!(bulk_construct, m)?)?;
    m.add_function(wrap_pyfunction!(ell, m)?)?;
    m.add_function(wrap_pyfunction!(legendre, m)?)?;
    m.add_function(wrap_pyfunction!(log_chernoff_upper, m)?)?;
    m.add_function(wrap_pyfunction!(exact_tail, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_state, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_point, m)?)?;
    m.add_function(wrap_pyfunction!(region_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(region_contains, m)?)?;
    m.add_function(wrap_pyfunction!(realize_point, m)?)?;
    m.add_function(wrap_pyfunction!(coding_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(holder_bound, m)?)?;
    m.add_function(wrap_pyfunction!(nogo_rate, m)?)?;
    m.add_function(wrap_pyfunction!(typical_algebra, m)?)?;
    Ok(())
}
