//! Python bindings for `recycle-nls`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use recycle_nls::cli_io::parse_nist_str;
use recycle_nls::recycler::{CoverageConfig, SimDistConfig};
use recycle_nls::{
    model_by_id, stats, CustomModel, Dataset, Direction, RecycleConfig, RegressionModel, SolverConfig,
    WeightScheme,
};

const DESIGN_RANGE: (f64, f64) = (0.0, 10.0);

fn py_err(e: recycle_nls::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scheme(s: &str) -> PyResult<WeightScheme> {
    s.parse().map_err(py_err)
}

fn dataset(x: Vec<f64>, y: Vec<f64>) -> PyResult<Dataset> {
    Dataset::new(x, y).map_err(py_err)
}

#[pyclass(name = "Model", frozen)]
pub struct PyModel {
    inner: Box<dyn RegressionModel>,
}

#[pymethods]
impl PyModel {
    /// `model1`, `model2`, `chwirut1` or `linear`.
    #[new]
    fn new(id: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model_by_id(id).map_err(py_err)?,
        })
    }

    /// A model from a TOML description with `name`, `params` and `expr`.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Box::new(CustomModel::from_toml_str(text).map_err(py_err)?),
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    fn eval(&self, x: f64, theta: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(x, &theta).map_err(py_err)
    }

    fn grad(&self, x: f64, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad(x, &theta).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.inner.name())
    }
}

#[pyclass(name = "FitResult", frozen, get_all)]
pub struct PyFit {
    theta: Vec<f64>,
    q: f64,
    rss: f64,
    sigma_hat: f64,
    iters: usize,
    converged: bool,
    stop: String,
    grad_norm: f64,
    /// Asymptotic covariance `Σ`, row-major, if the information matrix is nonsingular.
    sigma: Option<Vec<Vec<f64>>>,
}

impl From<&recycle_nls::FitResult> for PyFit {
    fn from(f: &recycle_nls::FitResult) -> Self {
        Self {
            theta: f.theta.clone(),
            q: f.q,
            rss: f.rss,
            sigma_hat: f.sigma_hat(),
            iters: f.iters,
            converged: f.converged,
            stop: format!("{:?}", f.stop),
            grad_norm: f.grad_norm,
            sigma: f
                .sigma
                .as_ref()
                .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect()),
        }
    }
}

#[pymethods]
impl PyFit {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(theta={:?}, sigma_hat={}, converged={})",
            self.theta, self.sigma_hat, self.converged
        )
    }
}

#[pyclass(name = "RecycleRun", frozen)]
pub struct PyRecycleRun {
    inner: recycle_nls::RecycleRun,
}

#[pymethods]
impl PyRecycleRun {
    #[getter]
    fn base(&self) -> PyFit {
        PyFit::from(&self.inner.base)
    }

    #[getter]
    fn scheme(&self) -> String {
        self.inner.scheme.clone()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn theta_star(&self) -> Vec<Vec<f64>> {
        self.inner.theta_star.clone()
    }

    #[getter]
    fn sigma_star(&self) -> Vec<f64> {
        self.inner.sigma_star.clone()
    }

    #[getter]
    fn r_star(&self) -> Vec<f64> {
        self.inner.r_star.clone()
    }

    #[getter]
    fn r_star_stud(&self) -> Vec<f64> {
        self.inner.r_star_stud.clone()
    }

    #[getter]
    fn flags(&self) -> Vec<String> {
        self.inner.flags.iter().map(|f| f.to_string()).collect()
    }

    #[getter]
    fn usable(&self) -> usize {
        self.inner.usable()
    }

    #[getter]
    fn unreliable(&self) -> bool {
        self.inner.unreliable()
    }

    /// Bootstrap-t interval `(lower, upper)` for the zero-based parameter `j`.
    /// The run must have been made with direction `e<j+1>`.
    #[pyo3(signature = (j, level=0.95))]
    fn confidence_interval(&self, j: usize, level: f64) -> PyResult<(f64, f64)> {
        let ci = recycle_nls::confidence_interval(&self.inner, j, level).map_err(py_err)?;
        Ok((ci.lower, ci.upper))
    }

    fn __len__(&self) -> usize {
        self.inner.replicates()
    }
}

/// Weighted least-squares fit; unit weights when `weights` is omitted.
#[pyfunction]
#[pyo3(signature = (model, x, y, start, weights=None))]
fn fit(
    model: &PyModel,
    x: Vec<f64>,
    y: Vec<f64>,
    start: Vec<f64>,
    weights: Option<Vec<f64>>,
) -> PyResult<PyFit> {
    let data = dataset(x, y)?;
    let w = weights.unwrap_or_else(|| vec![1.0; data.len()]);
    let f = recycle_nls::fit(model.inner.as_ref(), &data, &w, &start, &SolverConfig::default())
        .map_err(py_err)?;
    Ok(PyFit::from(&f))
}

/// One weight vector and its τ_n, from stream `stream` of `seed`.
#[pyfunction]
#[pyo3(signature = (scheme_name, n, seed=1, stream=1))]
fn draw_weights(scheme_name: &str, n: usize, seed: u64, stream: u64) -> PyResult<(Vec<f64>, f64)> {
    let wv = scheme(scheme_name)?.draw(n, recycle_nls::weights::RngStream::new(seed, stream));
    Ok((wv.w, wv.tau))
}

#[pyfunction]
#[pyo3(signature = (model, x, y, start, scheme_name="multinomial", replicates=1000, direction="e1", seed=1, workers=1))]
#[allow(clippy::too_many_arguments)]
fn recycle(
    py: Python<'_>,
    model: &PyModel,
    x: Vec<f64>,
    y: Vec<f64>,
    start: Vec<f64>,
    scheme_name: &str,
    replicates: usize,
    direction: &str,
    seed: u64,
    workers: usize,
) -> PyResult<PyRecycleRun> {
    let data = dataset(x, y)?;
    let source = scheme(scheme_name)?;
    let config = RecycleConfig {
        replicates,
        direction: Direction::parse(direction, model.inner.n_params()).map_err(py_err)?,
        solver: SolverConfig::default(),
        seed,
        workers,
    };
    let m = model.inner.as_ref();
    let run = py
        .detach(|| recycle_nls::run_recycle(m, &data, &start, &source, &config))
        .map_err(py_err)?;
    Ok(PyRecycleRun { inner: run })
}

/// Simulated sampling distribution of `R` at θ₀ under a fixed uniform design.
#[pyfunction]
#[pyo3(signature = (model, theta0, n, reps, direction=None, noise_sd=0.25, seed=1, workers=1))]
#[allow(clippy::too_many_arguments)]
fn sampling_distribution<'py>(
    py: Python<'py>,
    model: &PyModel,
    theta0: Vec<f64>,
    n: usize,
    reps: usize,
    direction: Option<&str>,
    noise_sd: f64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let p = model.inner.n_params();
    let direction = match direction {
        Some(s) => Direction::parse(s, p),
        None => Direction::normalized(vec![1.0; p]),
    }
    .map_err(py_err)?;
    let cfg = SimDistConfig {
        theta0,
        n,
        direction,
        reps,
        noise_sd,
        seed,
        workers,
        solver: SolverConfig::default(),
        design_range: DESIGN_RANGE,
    };
    let m = model.inner.as_ref();
    let sim = py
        .detach(|| recycle_nls::sampling_distribution_sim(m, &cfg))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("design", sim.design)?;
    d.set_item("raw", sim.raw)?;
    d.set_item("studentized", sim.studentized)?;
    d.set_item("sigma_hat", sim.sigma_hat)?;
    d.set_item("dropped", sim.dropped)?;
    Ok(d)
}

/// Coverage and mean length of bootstrap-t intervals for every parameter.
#[pyfunction]
#[pyo3(signature = (model, theta0, n, scheme_name="multinomial", replicates=1000, reps=100, level=0.95, noise_sd=0.25, seed=1, workers=1))]
#[allow(clippy::too_many_arguments)]
fn coverage<'py>(
    py: Python<'py>,
    model: &PyModel,
    theta0: Vec<f64>,
    n: usize,
    scheme_name: &str,
    replicates: usize,
    reps: usize,
    level: f64,
    noise_sd: f64,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = CoverageConfig {
        theta0,
        n,
        scheme: scheme(scheme_name)?,
        replicates,
        reps,
        level,
        noise_sd,
        seed,
        workers,
        solver: SolverConfig::default(),
        design_range: DESIGN_RANGE,
    };
    let m = model.inner.as_ref();
    let report = py.detach(|| recycle_nls::coverage_study(m, &cfg)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("scheme", report.scheme)?;
    d.set_item("dropped", report.dropped)?;
    d.set_item("unreliable_runs", report.unreliable_runs)?;
    d.set_item(
        "coverage",
        report.params.iter().map(|c| c.coverage).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "mean_length",
        report.params.iter().map(|c| c.mean_length).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "intervals",
        report.params.iter().map(|c| c.intervals).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Parses the text of a NIST StRD nonlinear-regression `.dat` file.
#[pyfunction]
fn parse_nist<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let nist = parse_nist_str(text).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("name", nist.name.clone())?;
    d.set_item("x", nist.data.x().to_vec())?;
    d.set_item("y", nist.data.y().to_vec())?;
    d.set_item("certified", nist.certified.clone())?;
    d.set_item("certified_sd", nist.certified_sd.clone())?;
    d.set_item("residual_sd", nist.residual_sd)?;
    d.set_item("starts", (0..).map_while(|k| nist.start(k)).collect::<Vec<_>>())?;
    Ok(d)
}

/// Type-7 quantile of an unsorted sample.
#[pyfunction]
fn quantile(mut sample: Vec<f64>, q: f64) -> PyResult<f64> {
    sample.sort_by(f64::total_cmp);
    stats::quantile(&sample, q).map_err(py_err)
}

#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats::ks_two_sample(&a, &b).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (a, mu=0.0, sigma=1.0))]
fn ks_vs_normal(a: Vec<f64>, mu: f64, sigma: f64) -> PyResult<f64> {
    stats::ks_vs_normal(&a, mu, sigma).map_err(py_err)
}

#[pymodule]
fn recycle_nls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyFit>()?;
    m.add_class::<PyRecycleRun>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(draw_weights, m)?)?;
    m.add_function(wrap_pyfunction!(recycle, m)?)?;
    m.add_function(wrap_pyfunction!(sampling_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(coverage, m)?)?;
    m.add_function(wrap_pyfunction!(parse_nist, m)?)?;
    m.add_function(wrap_pyfunction!(quantile, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(ks_vs_normal, m)?)?;
    Ok(())
}
