//! Python bindings: worker counts, supports, costs and full protocol runs.

use cmpc::{
    baseline_counts, check_decodability, cost_report, gamma_age, h_support, n_age, n_polydot, predicted_costs,
    run_protocol, Matrix, PrimeModulus, ProtocolConfig, Scheme, SchemeParams, DEFAULT_PRIME,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn py_err(e: cmpc::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_scheme(name: &str) -> PyResult<Scheme> {
    name.parse::<Scheme>().map_err(py_err)
}

/// Code parameters for one scheme.
#[pyclass(name = "SchemeParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PySchemeParams {
    inner: SchemeParams,
}

#[pymethods]
impl PySchemeParams {
    /// `lam` selects the AGE gap; the minimizing one when omitted.
    #[new]
    #[pyo3(signature = (scheme, s, t, z, lam=None))]
    fn new(scheme: &str, s: u64, t: u64, z: u64, lam: Option<u64>) -> PyResult<Self> {
        let inner = cmpc::cli::protocol_params(parse_scheme(scheme)?, s, t, z, lam).map_err(py_err)?;
        Ok(PySchemeParams { inner })
    }

    #[getter]
    fn scheme(&self) -> String {
        self.inner.scheme().to_string()
    }
    #[getter]
    fn s(&self) -> u64 {
        self.inner.s()
    }
    #[getter]
    fn t(&self) -> u64 {
        self.inner.t()
    }
    #[getter]
    fn z(&self) -> u64 {
        self.inner.z()
    }
    #[getter]
    fn lam(&self) -> u64 {
        self.inner.lambda()
    }

    /// Exponents of `F_A(x) F_B(x)`.
    fn h_support(&self) -> PyResult<Vec<u64>> {
        Ok(h_support(&self.inner).map_err(py_err)?.as_slice().to_vec())
    }

    fn n_workers(&self) -> PyResult<usize> {
        Ok(h_support(&self.inner).map_err(py_err)?.len())
    }

    fn decodable(&self) -> PyResult<bool> {
        Ok(check_decodability(&self.inner).map_err(py_err)?.decodable)
    }

    fn __repr__(&self) -> String {
        format!(
            "SchemeParams({}, s={}, t={}, z={}, lam={})",
            self.inner.scheme(),
            self.inner.s(),
            self.inner.t(),
            self.inner.z(),
            self.inner.lambda()
        )
    }
}

/// `(N, branch, lambda_star)` from the closed forms.
#[pyfunction]
fn required_workers(scheme: &str, s: u64, t: u64, z: u64) -> PyResult<(u64, String, Option<u64>)> {
    let r = cmpc::required_workers(parse_scheme(scheme)?, s, t, z).map_err(py_err)?;
    Ok((r.n, r.branch.to_string(), r.lambda_star))
}

#[pyfunction]
fn age_count(s: u64, t: u64, z: u64) -> PyResult<(u64, Option<u64>)> {
    let r = n_age(s, t, z).map_err(py_err)?;
    Ok((r.n, r.lambda_star))
}

#[pyfunction]
fn polydot_count(s: u64, t: u64, z: u64) -> PyResult<u64> {
    Ok(n_polydot(s, t, z).map_err(py_err)?.n)
}

#[pyfunction]
fn gamma(s: u64, t: u64, z: u64, lam: u64) -> PyResult<(u64, String)> {
    let (n, b) = gamma_age(s, t, z, lam).map_err(py_err)?;
    Ok((n, b.to_string()))
}

#[pyfunction]
fn baselines<'py>(py: Python<'py>, s: u64, t: u64, z: u64) -> PyResult<Bound<'py, PyDict>> {
    let b = baseline_counts(s, t, z);
    let d = PyDict::new(py);
    d.set_item("entangled", b.entangled)?;
    d.set_item("ssmm", b.ssmm)?;
    d.set_item("gcsa_na", b.gcsa_na)?;
    Ok(d)
}

/// Per-worker `(xi, sigma)` and total `zeta`.
#[pyfunction]
fn costs(m: u64, s: u64, t: u64, z: u64, n: u64) -> PyResult<(u128, u128, u128)> {
    let c = predicted_costs(m, s, t, z, n).map_err(py_err)?;
    Ok((c.xi, c.sigma, c.zeta))
}

fn to_matrix(field: &PrimeModulus, rows: Option<Vec<Vec<u64>>>, m: usize, rng: &mut ChaCha8Rng) -> PyResult<Matrix> {
    match rows {
        Some(r) => Ok(Matrix::from_rows(r).map_err(py_err)?.reduced(field)),
        None => Ok(Matrix::random(field, m, m, rng)),
    }
}

/// Runs the protocol on `a` and `b` (random when omitted) and returns the
/// reconstruction together with the expected product and the cost audit.
#[pyfunction]
#[pyo3(signature = (params, m, seed=0, a=None, b=None, prime=DEFAULT_PRIME))]
fn run<'py>(
    py: Python<'py>,
    params: &PySchemeParams,
    m: usize,
    seed: u64,
    a: Option<Vec<Vec<u64>>>,
    b: Option<Vec<Vec<u64>>>,
    prime: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let field = PrimeModulus::new(prime).map_err(py_err)?;
    let config = ProtocolConfig::new(params.inner, m, field, seed).map_err(py_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = to_matrix(&field, a, m, &mut rng)?;
    let b = to_matrix(&field, b, m, &mut rng)?;
    let expected = a.transpose().mul(&field, &b).map_err(py_err)?;
    let out = py.detach(|| run_protocol(&a, &b, &config)).map_err(py_err)?;
    let report = cost_report(&out.transcript).map_err(py_err)?;
    let measured = report.measured.unwrap_or_default();
    let d = PyDict::new(py);
    d.set_item("y", out.y.to_rows())?;
    d.set_item("expected", expected.to_rows())?;
    d.set_item("n_workers", config.n_workers())?;
    d.set_item("threshold", config.threshold())?;
    d.set_item("predicted", (report.predicted.xi, report.predicted.sigma, report.predicted.zeta))?;
    d.set_item("measured", (measured.xi, measured.sigma, measured.zeta))?;
    Ok(d)
}

#[pymodule]
pub fn cmpc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchemeParams>()?;
    m.add_function(wrap_pyfunction!(required_workers, m)?)?;
    m.add_function(wrap_pyfunction!(age_count, m)?)?;
    m.add_function(wrap_pyfunction!(polydot_count, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(baselines, m)?)?;
    m.add_function(wrap_pyfunction!(costs, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("DEFAULT_PRIME", DEFAULT_PRIME)?;
    Ok(())
}
