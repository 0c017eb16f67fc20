//! Python bindings. Reports come back as plain dicts (via the crate's JSON
//! serialization), signals as the `Signal` class.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use uniformity::{concat, counting, degree, gowers, increment, io, verify, Error, ProgressionInstance};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::DegenerateWeight { .. } | Error::Malformed(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (io::to_json(value),))
}

fn instance(n: u64, q: u64) -> PyResult<ProgressionInstance> {
    ProgressionInstance::new(n, q).map_err(to_py)
}

/// Finitely supported function on the integers: `values[i]` sits at `offset + i`.
#[pyclass(name = "Signal", module = "uniformity_py")]
struct PySignal {
    inner: uniformity::Signal,
}

#[pymethods]
impl PySignal {
    #[new]
    fn new(offset: i64, values: Vec<Complex64>) -> Self {
        PySignal {
            inner: uniformity::Signal::new(offset, values),
        }
    }

    #[staticmethod]
    fn indicator(set: Vec<i64>) -> Self {
        PySignal {
            inner: uniformity::Signal::indicator(&set),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySignal {
            inner: io::parse_signal(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        io::signal_to_json(&self.inner)
    }

    #[getter]
    fn offset(&self) -> i64 {
        self.inner.offset()
    }

    #[getter]
    fn values(&self) -> Vec<Complex64> {
        self.inner.values().to_vec()
    }

    fn __getitem__(&self, x: i64) -> Complex64 {
        self.inner.get(x)
    }

    fn __len__(&self) -> usize {
        self.inner.width()
    }

    fn __repr__(&self) -> String {
        format!("Signal(offset={}, width={})", self.inner.offset(), self.inner.width())
    }

    fn l2_sq(&self) -> f64 {
        self.inner.l2_sq()
    }

    fn shift(&self, t: i64) -> Self {
        PySignal {
            inner: self.inner.shift(t),
        }
    }

    fn derivative(&self, h: i64) -> Self {
        PySignal {
            inner: self.inner.mult_derivative(h),
        }
    }
}

/// `||f||_{U^s}^{2^s}`.
#[pyfunction]
fn u_norm_pow(f: &PySignal, s: u32) -> PyResult<f64> {
    gowers::u_norm_pow_guarded(&f.inner, s, gowers::OP_LIMIT).map_err(to_py)
}

/// Exact integer value for signals with entries in {-1, 0, 1}, else None.
#[pyfunction]
fn u_norm_pow_exact(f: &PySignal, s: u32) -> PyResult<Option<i128>> {
    gowers::u_norm_pow_exact(&f.inner, s).map_err(to_py)
}

/// Box norm over directions given as `(step, length)` pairs.
#[pyfunction]
fn box_norm_pow(f: &PySignal, dirs: Vec<(i64, u64)>) -> PyResult<Complex64> {
    let spec = gowers::BoxSpec::progressions(&dirs).map_err(to_py)?;
    gowers::box_norm_pow(&f.inner, &spec).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (set, n, q = 1))]
fn lambda_count(set: Vec<i64>, n: u64, q: u64) -> PyResult<u64> {
    Ok(counting::lambda_count(&set, &instance(n, q)?))
}

/// `(x, y)` pairs with `x, x + y, x + q y^2` all in the set.
#[pyfunction]
#[pyo3(signature = (set, n, q = 1))]
fn progressions(set: Vec<i64>, n: u64, q: u64) -> PyResult<Vec<(i64, i64)>> {
    let inst = instance(n, q)?;
    Ok(counting::enumerate_progressions(&set, &inst)
        .into_iter()
        .map(|w| (w.x, w.y))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (f0, f1, f2, n, q = 1))]
fn counting_operator(f0: &PySignal, f1: &PySignal, f2: &PySignal, n: u64, q: u64) -> PyResult<Complex64> {
    Ok(counting::lambda(&f0.inner, &f1.inner, &f2.inner, &instance(n, q)?))
}

#[pyfunction]
#[pyo3(signature = (f0, f1, n, q = 1))]
fn dual_function(f0: &PySignal, f1: &PySignal, n: u64, q: u64) -> PyResult<PySignal> {
    Ok(PySignal {
        inner: counting::dual_function(&f0.inner, &f1.inner, &instance(n, q)?),
    })
}

#[pyfunction]
#[pyo3(signature = (n, q = 1))]
fn greedy_free_set(n: u64, q: u64) -> PyResult<Vec<i64>> {
    Ok(counting::greedy_free_set(&instance(n, q)?))
}

#[pyfunction]
#[pyo3(signature = (alpha, tmax, q = 1, target_eps = 0.0))]
fn find_denominator<'py>(
    py: Python<'py>,
    alpha: f64,
    tmax: u64,
    q: u64,
    target_eps: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(
        py,
        &degree::find_denominator(alpha, q, tmax, target_eps).map_err(to_py)?,
    )
}

/// Returns `(l, r, metrics)`.
#[pyfunction]
#[pyo3(signature = (f, c, d, window = 0, grid_factor = 8))]
fn invert_arithmetic_box<'py>(
    py: Python<'py>,
    f: &PySignal,
    c: u64,
    d: u64,
    window: u64,
    grid_factor: usize,
) -> PyResult<(PySignal, PySignal, Bound<'py, PyAny>)> {
    let pair = concat::invert_arithmetic_box(&f.inner, c, d, grid_factor).map_err(to_py)?;
    let metrics = to_dict(py, &pair.metrics(&f.inner, window))?;
    Ok((PySignal { inner: pair.l }, PySignal { inner: pair.r }, metrics))
}

#[pyfunction]
#[pyo3(signature = (set, n, q = 1, qprime_max = 8, nprime_min = increment::N_FLOOR))]
fn find_increment<'py>(
    py: Python<'py>,
    set: Vec<i64>,
    n: u64,
    q: u64,
    qprime_max: u64,
    nprime_min: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let sp = increment::SearchParams {
        qprime_max,
        nprime_min,
        ..Default::default()
    };
    to_dict(
        py,
        &increment::find_increment(&set, &instance(n, q)?, &sp).map_err(to_py)?,
    )
}

/// Density-increment trace as a dict; the `csv` key holds the CSV rendering.
#[pyfunction]
#[pyo3(signature = (set, n, max_steps = 64, qprime_max = 8, nprime_min = increment::N_FLOOR))]
fn iterate_increment<'py>(
    py: Python<'py>,
    set: Vec<i64>,
    n: u64,
    max_steps: usize,
    qprime_max: u64,
    nprime_min: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let sp = increment::SearchParams {
        qprime_max,
        nprime_min,
        ..Default::default()
    };
    let trace = py
        .detach(|| increment::iterate_increment(&set, n, max_steps, &sp))
        .map_err(to_py)?;
    let out = to_dict(py, &trace)?;
    out.set_item("csv", trace.to_csv())?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (suite, trials = 100, seed = 1, width = 16, n = 10_000, mode = "derived"))]
fn verify_suite<'py>(
    py: Python<'py>,
    suite: &str,
    trials: u64,
    seed: u64,
    width: usize,
    n: u64,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "derived" => degree::ExponentMode::Derived,
        "paper" => degree::ExponentMode::Paper,
        other => {
            return Err(PyValueError::new_err(format!(
                "mode must be paper or derived, got {other:?}"
            )))
        }
    };
    let cfg = verify::VerifyConfig {
        trials,
        seed,
        width,
        n,
        mode,
    };
    let report = py.detach(|| verify::run_suite(suite, &cfg)).map_err(to_py)?;
    to_dict(py, &report)
}

#[pymodule]
fn uniformity_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySignal>()?;
    m.add_function(wrap_pyfunction!(u_norm_pow, m)?)?;
    m.add_function(wrap_pyfunction!(u_norm_pow_exact, m)?)?;
    m.add_function(wrap_pyfunction!(box_norm_pow, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_count, m)?)?;
    m.add_function(wrap_pyfunction!(progressions, m)?)?;
    m.add_function(wrap_pyfunction!(counting_operator, m)?)?;
    m.add_function(wrap_pyfunction!(dual_function, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_free_set, m)?)?;
    m.add_function(wrap_pyfunction!(find_denominator, m)?)?;
    m.add_function(wrap_pyfunction!(invert_arithmetic_box, m)?)?;
    m.add_function(wrap_pyfunction!(find_increment, m)?)?;
    m.add_function(wrap_pyfunction!(iterate_increment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    m.add("SUITES", verify::SUITES.to_vec())?;
    Ok(())
}
