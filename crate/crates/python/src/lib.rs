//! Python bindings: tensors, the norm estimators, coefficient families and
//! the verification suites.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use polyext::daviegamelin::{dg_verify as dg_verify_core, DgConfig};
use polyext::extensions::{ab_extend, uniterated_extend, CoefficientFamily, TailVector};
use polyext::ideals::{integral_dual_norm, nuclear_norm, sandwich, sup_norm_witness};
use polyext::norms::{injective_snorm, projective_snorm};
use polyext::suites::{run_suite, Fixtures, Suite, DG_EPSILONS};
use polyext::{polarize, sym_power, Ball, Error, OptBudget, SymTensor};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Infeasible { .. } | Error::Lp(_) | Error::StageExhausted { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn ball(name: &str) -> PyResult<Ball> {
    name.parse().map_err(py_err)
}

fn budget(seed: u64, restarts: usize, iters: usize, tol: f64) -> PyResult<OptBudget> {
    let b = OptBudget {
        restarts,
        iterations: iters,
        seed,
        tolerance: tol,
    };
    b.validate().map_err(py_err)?;
    Ok(b)
}

/// Symmetric tensor of order `n` on `R^d`; entries are keyed by sorted index lists.
#[pyclass(name = "Tensor", module = "polyext_py", frozen)]
struct PyTensor {
    inner: SymTensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    #[pyo3(signature = (n, d, entries=Vec::new()))]
    fn new(n: usize, d: usize, entries: Vec<(Vec<usize>, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: SymTensor::from_entries(n, d, entries).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: SymTensor::from_json(text).map_err(py_err)?,
        })
    }

    /// `⊗^n x`.
    #[staticmethod]
    fn sym_power(x: Vec<f64>, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: sym_power(&x, n).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        self.inner.entries().map(|(k, v)| (k.as_slice().to_vec(), v)).collect()
    }

    /// Polynomial value `P(x)`.
    fn evaluate(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate(&x).map_err(py_err)
    }

    /// Symmetric multilinear form `A(x_1, ..., x_n)` with `A(x, ..., x) = P(x)`.
    fn multilinear(&self, args: Vec<Vec<f64>>) -> PyResult<f64> {
        let refs: Vec<&[f64]> = args.iter().map(|a| a.as_slice()).collect();
        polarize(&self.inner).eval(&refs).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Tensor(n={}, d={}, nnz={})", self.inner.order(), self.inner.dim(), self.inner.nnz())
    }
}

/// `εs` lower bound and the functional attaining it.
#[pyfunction]
#[pyo3(signature = (w, ball_name="l2", seed=0, restarts=12, iters=400, tol=1e-9))]
fn injective_norm(w: &PyTensor, ball_name: &str, seed: u64, restarts: usize, iters: usize, tol: f64) -> PyResult<(f64, Vec<f64>)> {
    let est = injective_snorm(&w.inner, ball(ball_name)?, &budget(seed, restarts, iters, tol)?);
    Ok((est.value, est.functional))
}

/// `πs` upper bound and its decomposition as `(lambda, x)` pairs.
#[pyfunction]
#[pyo3(signature = (w, ball_name="l2", rank=None, seed=0, restarts=12, iters=400, tol=1e-9))]
fn projective_norm(
    py: Python<'_>,
    w: &PyTensor,
    ball_name: &str,
    rank: Option<usize>,
    seed: u64,
    restarts: usize,
    iters: usize,
    tol: f64,
) -> PyResult<(f64, Vec<(f64, Vec<f64>)>)> {
    let b = ball(ball_name)?;
    let bud = budget(seed, restarts, iters, tol)?;
    let est = py.detach(|| projective_snorm(&w.inner, b, rank, &bud)).map_err(py_err)?;
    let terms = est.decomposition.terms.into_iter().map(|t| (t.lambda, t.x)).collect();
    Ok((est.value, terms))
}

/// Sup norm of the polynomial over the unit ball, with the point found.
#[pyfunction]
#[pyo3(signature = (p, ball_name="l2", seed=0, restarts=12, iters=400, tol=1e-9))]
fn sup_norm(p: &PyTensor, ball_name: &str, seed: u64, restarts: usize, iters: usize, tol: f64) -> PyResult<(f64, Vec<f64>)> {
    let m = sup_norm_witness(&p.inner, ball(ball_name)?, &budget(seed, restarts, iters, tol)?);
    Ok((m.value, m.point))
}

/// Nuclear norm upper bound.
#[pyfunction]
#[pyo3(signature = (p, ball_name="l2", rank=None, seed=0))]
fn nuclear(py: Python<'_>, p: &PyTensor, ball_name: &str, rank: Option<usize>, seed: u64) -> PyResult<f64> {
    let b = ball(ball_name)?;
    let bud = OptBudget::with_seed(seed);
    py.detach(|| nuclear_norm(&p.inner, b, rank, &bud)).map(|e| e.value).map_err(py_err)
}

/// Integral (dual) norm lower bound.
#[pyfunction]
#[pyo3(signature = (p, ball_name="l2", seed=0))]
fn integral_dual(py: Python<'_>, p: &PyTensor, ball_name: &str, seed: u64) -> PyResult<f64> {
    let b = ball(ball_name)?;
    let bud = OptBudget::with_seed(seed);
    py.detach(|| integral_dual_norm(&p.inner, b, &bud)).map_err(py_err)
}

/// `(sup, integral_dual, nuclear)` computed together.
#[pyfunction]
#[pyo3(signature = (p, ball_name="l2", seed=0))]
fn norm_sandwich(py: Python<'_>, p: &PyTensor, ball_name: &str, seed: u64) -> PyResult<(f64, f64, f64)> {
    let b = ball(ball_name)?;
    let bud = OptBudget::with_seed(seed);
    let s = py.detach(|| sandwich(&p.inner, b, &bud)).map_err(py_err)?;
    Ok((s.sup, s.integral_dual, s.nuclear))
}

/// Banded plus geometric-diagonal coefficient family on eventually constant sequences.
#[pyclass(name = "Family", module = "polyext_py", frozen)]
struct PyFamily {
    inner: CoefficientFamily,
}

#[pymethods]
impl PyFamily {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: CoefficientFamily = serde_json::from_str(text).map_err(|e| py_err(e.into()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("family serializes")
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    /// `P(x)` on the finitely supported sequence `(x, 0, 0, ...)`.
    fn evaluate(&self, x: Vec<f64>) -> f64 {
        self.inner.evaluate(&x)
    }

    /// Closed-form extension at the sequence `(head, tail, tail, ...)`.
    fn extend(&self, head: Vec<f64>, tail: f64) -> f64 {
        ab_extend(&self.inner).value(&TailVector::new(head, tail))
    }

    /// Values at the given stages, the last value, and whether the last two agree within `tol`.
    #[pyo3(signature = (head, tail, stages, tol=1e-9))]
    fn uniterated(&self, head: Vec<f64>, tail: f64, stages: Vec<usize>, tol: f64) -> PyResult<(Vec<(usize, f64)>, f64, bool)> {
        let rep = uniterated_extend(&self.inner, &TailVector::new(head, tail), &stages, tol).map_err(py_err)?;
        let trace = rep.trace.iter().map(|s| (s.stage, s.value)).collect();
        Ok((trace, rep.value, rep.converged))
    }

    /// Averaging check at `points` given as `(head, tail)` pairs; returns the report as JSON.
    #[pyo3(signature = (points, epsilon, seed=0))]
    fn dg_verify(&self, py: Python<'_>, points: Vec<(Vec<f64>, f64)>, epsilon: f64, seed: u64) -> PyResult<String> {
        let points: Vec<TailVector> = points.into_iter().map(|(h, t)| TailVector::new(h, t)).collect();
        let config = DgConfig::for_points(&self.inner, &points, epsilon, seed);
        let report = py.detach(|| dg_verify_core(&self.inner, &points, &config)).map_err(py_err)?;
        Ok(serde_json::to_string(&report).expect("report serializes"))
    }
}

/// Runs a verification suite on the built-in fixtures; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (suite, seed=0, epsilon=None))]
fn verify(py: Python<'_>, suite: &str, seed: u64, epsilon: Option<f64>) -> PyResult<String> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let epsilons = epsilon.map_or(DG_EPSILONS.to_vec(), |e| vec![e]);
    let report = py.detach(|| run_suite(suite, seed, &Fixtures::builtin(), &epsilons));
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

#[pymodule]
fn polyext_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyFamily>()?;
    m.add_function(wrap_pyfunction!(injective_norm, m)?)?;
    m.add_function(wrap_pyfunction!(projective_norm, m)?)?;
    m.add_function(wrap_pyfunction!(sup_norm, m)?)?;
    m.add_function(wrap_pyfunction!(nuclear, m)?)?;
    m.add_function(wrap_pyfunction!(integral_dual, m)?)?;
    m.add_function(wrap_pyfunction!(norm_sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
