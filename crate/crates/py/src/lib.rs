//! Python bindings. Fields cross the boundary as flat lists of node values in
//! grid order.

use std::sync::Arc;

use ::activeop as core;
use core::experiments::{ExperimentConfig, ExperimentOutput, LowerBoundConfig};
use core::{CoefficientLaw, Domain, EigenSystem, FieldFunction, Layout, Measure, NoiseMode, Oracle};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: core::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Arc<core::Grid>,
}

#[pymethods]
impl PyGrid {
    /// `domain` is "box", "torus" or "interval"; intervals carry a Gaussian
    /// measure of the given variance.
    #[new]
    #[pyo3(signature = (dim, points_per_dim, domain = "box", variance = 1.0, half_width = None, layout = "lattice"))]
    fn new(
        dim: usize,
        points_per_dim: usize,
        domain: &str,
        variance: f64,
        half_width: Option<f64>,
        layout: &str,
    ) -> PyResult<Self> {
        let (domain, measure) = match domain {
            "box" => (Domain::Box01, Measure::Lebesgue),
            "torus" => (Domain::Torus01, Measure::Lebesgue),
            "interval" => (
                Domain::Interval { half_width: half_width.unwrap_or(6.0 * variance.sqrt()) },
                Measure::Gaussian { variance },
            ),
            other => return Err(PyValueError::new_err(format!("unknown domain {other:?}"))),
        };
        let layout = match layout {
            "lattice" => Layout::Lattice,
            "midpoint" => Layout::Midpoint,
            other => return Err(PyValueError::new_err(format!("unknown layout {other:?}"))),
        };
        Ok(PyGrid { inner: core::Grid::with_layout(dim, points_per_dim, domain, measure, layout).py()? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn points_per_dim(&self) -> usize {
        self.inner.points_per_dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn nodes(&self) -> Vec<Vec<f64>> {
        self.inner.nodes().map(|n| n.to_vec()).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn inner_product(&self, f: Vec<f64>, g: Vec<f64>) -> PyResult<f64> {
        core::inner_product(&self.field(f)?, &self.field(g)?).py()
    }

    fn l2_norm(&self, f: Vec<f64>) -> PyResult<f64> {
        Ok(core::l2_norm(&self.field(f)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(dim={}, points_per_dim={}, domain={:?})",
            self.inner.dim(),
            self.inner.points_per_dim(),
            self.inner.domain()
        )
    }
}

impl PyGrid {
    fn field(&self, values: Vec<f64>) -> PyResult<FieldFunction> {
        FieldFunction::new(self.inner.clone(), values).py()
    }
}

#[pyclass(name = "EigenSystem", frozen)]
struct PyEigenSystem {
    inner: Arc<EigenSystem>,
}

#[pymethods]
impl PyEigenSystem {
    #[staticmethod]
    #[pyo3(signature = (alpha, beta, gamma, dim, count))]
    fn torus(alpha: f64, beta: f64, gamma: f64, dim: usize, count: usize) -> PyResult<Self> {
        Ok(Self::wrap(core::torus_eigensystem(alpha, beta, gamma, dim, count).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, beta, gamma, dim, count))]
    fn dirichlet_box(alpha: f64, beta: f64, gamma: f64, dim: usize, count: usize) -> PyResult<Self> {
        Ok(Self::wrap(core::dirichlet_box_eigensystem(alpha, beta, gamma, dim, count).py()?))
    }

    #[staticmethod]
    fn brownian(count: usize) -> PyResult<Self> {
        Ok(Self::wrap(core::brownian_eigensystem(count).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (lengthscale, variance, count, dim = 1))]
    fn rbf(lengthscale: f64, variance: f64, count: usize, dim: usize) -> PyResult<Self> {
        Ok(Self::wrap(core::rbf_eigensystem_nd(lengthscale, variance, dim, count).py()?))
    }

    /// Nystrom estimate for "rbf" (Gaussian measure) or "brownian" (Lebesgue on [0,1]).
    #[staticmethod]
    #[pyo3(signature = (kernel, samples, count, seed = 0, lengthscale = 1.0, variance = 1.0))]
    fn nystrom(kernel: &str, samples: usize, count: usize, seed: u64, lengthscale: f64, variance: f64) -> PyResult<Self> {
        let sys = match kernel {
            "rbf" => core::nystrom_eigensystem(
                core::kernels::rbf(lengthscale),
                Measure::Gaussian { variance },
                Domain::Interval { half_width: 6.0 * variance.sqrt() },
                1,
                samples,
                count,
                seed,
            ),
            "brownian" => core::nystrom_eigensystem(
                core::kernels::brownian(),
                Measure::Lebesgue,
                Domain::Box01,
                1,
                samples,
                count,
                seed,
            ),
            other => return Err(PyValueError::new_err(format!("unknown kernel {other:?}"))),
        };
        Ok(Self::wrap(sys.py()?))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn eval(&self, j: usize, x: Vec<f64>) -> PyResult<f64> {
        if j >= self.inner.len() || x.len() != self.inner.dim() {
            return Err(PyValueError::new_err("index or point dimension out of range"));
        }
        Ok(self.inner.eval(j, &x))
    }

    fn head_sum(&self, n: usize) -> PyResult<f64> {
        self.inner.head_sum(n).py()
    }

    fn tail_sum(&self, n: usize) -> PyResult<f64> {
        self.inner.tail_sum(n).py()
    }

    /// Defining constants as a JSON string.
    fn params(&self) -> String {
        self.inner.params_json().to_string()
    }

    fn __repr__(&self) -> String {
        self.inner.summary()
    }
}

impl PyEigenSystem {
    fn wrap(sys: EigenSystem) -> Self {
        PyEigenSystem { inner: Arc::new(sys) }
    }
}

#[pyclass(name = "Oracle", frozen)]
struct PyOracle {
    inner: Arc<dyn Oracle>,
    grid: Arc<core::Grid>,
}

#[pymethods]
impl PyOracle {
    #[staticmethod]
    fn poisson_fd(grid: &PyGrid) -> PyResult<Self> {
        Ok(Self::wrap(Arc::new(core::PoissonFd::new(grid.inner.clone()).py()?), grid))
    }

    #[staticmethod]
    fn poisson_spectral(grid: &PyGrid) -> PyResult<Self> {
        Ok(Self::wrap(Arc::new(core::PoissonSpectral::full(grid.inner.clone()).py()?), grid))
    }

    #[staticmethod]
    #[pyo3(signature = (grid, tau = 1e-2, steps = 1000))]
    fn heat_fd(grid: &PyGrid, tau: f64, steps: usize) -> PyResult<Self> {
        Ok(Self::wrap(Arc::new(core::HeatFd::new(grid.inner.clone(), tau, steps).py()?), grid))
    }

    #[staticmethod]
    #[pyo3(signature = (grid, tau = 1e-2))]
    fn heat_spectral(grid: &PyGrid, tau: f64) -> PyResult<Self> {
        Ok(Self::wrap(Arc::new(core::HeatSpectral::full(grid.inner.clone(), tau).py()?), grid))
    }

    /// Adds a perturbation of L2 norm `epsilon`; `mode` is "fixed" or "random".
    #[pyo3(signature = (epsilon, mode = "fixed", seed = 0))]
    fn noisy(&self, epsilon: f64, mode: &str, seed: u64) -> PyResult<Self> {
        let mode = match mode {
            "fixed" => NoiseMode::FixedDirection,
            "random" => NoiseMode::RandomUnit,
            other => return Err(PyValueError::new_err(format!("unknown noise mode {other:?}"))),
        };
        let noisy = core::NoisyOracle::new(self.inner.clone(), &self.grid, epsilon, mode, seed).py()?;
        Ok(PyOracle { inner: Arc::new(noisy), grid: self.grid.clone() })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    fn apply(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = FieldFunction::new(self.grid.clone(), values).py()?;
        Ok(self.inner.apply(&v).py()?.into_values())
    }

    /// Oracle description as a JSON string.
    fn descriptor(&self) -> String {
        serde_json::to_string(&self.inner.descriptor()).unwrap_or_default()
    }
}

impl PyOracle {
    fn wrap(inner: Arc<dyn Oracle>, grid: &PyGrid) -> Self {
        PyOracle { inner, grid: grid.inner.clone() }
    }
}

#[pyclass(name = "Operator", frozen)]
struct PyOperator {
    inner: core::RankOneOperator,
}

#[pymethods]
impl PyOperator {
    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn apply(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = FieldFunction::new(self.inner.grid().clone(), values).py()?;
        Ok(self.inner.apply(&v).py()?.into_values())
    }

    /// Relative MSE against `truth` over the given test inputs: (mean, stderr).
    fn relative_mse(&self, truth: &PyOracle, inputs: Vec<Vec<f64>>) -> PyResult<(f64, f64)> {
        let grid = self.inner.grid();
        let inputs = inputs
            .into_iter()
            .map(|v| FieldFunction::new(grid.clone(), v))
            .collect::<core::Result<Vec<_>>>()
            .py()?;
        let r = core::relative_mse(&self.inner, truth.inner.as_ref(), &inputs).py()?;
        Ok((r.mean, r.stderr))
    }
}

fn law(name: &str, p: f64) -> PyResult<CoefficientLaw> {
    match name {
        "gaussian" => Ok(CoefficientLaw::StandardGaussian),
        "three_point" => Ok(CoefficientLaw::ThreePoint { p }),
        other => Err(PyValueError::new_err(format!("unknown law {other:?}"))),
    }
}

/// Draws KL fields with indices `0..count`; returns (coefficients, values) per draw.
#[pyfunction]
#[pyo3(signature = (sys, m, grid, count = 1, law_name = "gaussian", p = 0.5, seed = 0))]
fn sample_kl(
    sys: &PyEigenSystem,
    m: usize,
    grid: &PyGrid,
    count: usize,
    law_name: &str,
    p: f64,
    seed: u64,
) -> PyResult<Vec<(Vec<f64>, Vec<f64>)>> {
    let sampler = core::KlSampler::new(&sys.inner, m, &grid.inner, law(law_name, p)?, seed).py()?;
    Ok((0..count as u64)
        .map(|i| {
            let s = sampler.sample(i);
            (s.coefficients, s.field.into_values())
        })
        .collect())
}

/// Whitened KL coefficients `<v, phi_j> / sqrt(lambda_j)` for `j < m`.
#[pyfunction]
fn kl_project(values: Vec<f64>, grid: &PyGrid, sys: &PyEigenSystem, m: usize) -> PyResult<Vec<f64>> {
    let v = FieldFunction::new(grid.inner.clone(), values).py()?;
    Ok(core::kl_project(&v, &sys.inner, m).py()?.coefficients)
}

/// Active estimator: queries the oracle on the leading `n` eigenfunctions.
#[pyfunction]
fn fit_active(sys: &PyEigenSystem, oracle: &PyOracle, n: usize, grid: &PyGrid) -> PyResult<PyOperator> {
    Ok(PyOperator { inner: core::fit_active(&sys.inner, oracle.inner.as_ref(), n, &grid.inner).py()? })
}

/// Least-squares fit from paired input and output fields.
#[pyfunction]
#[pyo3(signature = (inputs, outputs, grid, trunc_tol = core::estimators::DEFAULT_TRUNC_TOL))]
fn fit_passive_lsq(inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>, grid: &PyGrid, trunc_tol: f64) -> PyResult<PyOperator> {
    if inputs.len() != outputs.len() {
        return Err(PyValueError::new_err("inputs and outputs differ in length"));
    }
    let pairs = inputs
        .into_iter()
        .zip(outputs)
        .map(|(a, b)| Ok((FieldFunction::new(grid.inner.clone(), a)?, FieldFunction::new(grid.inner.clone(), b)?)))
        .collect::<core::Result<Vec<_>>>()
        .py()?;
    Ok(PyOperator { inner: core::fit_passive_lsq(&pairs, trunc_tol).py()? })
}

/// Risk upper bound as a dict with head, tail, irreducible, reducible and total.
#[pyfunction]
fn upper_bound(py: Python<'_>, sys: &PyEigenSystem, n: usize, epsilon: f64, opnorm: f64) -> PyResult<Py<PyAny>> {
    let r = core::upper_bound(&sys.inner, n, epsilon, opnorm).py()?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("head", r.head)?;
    d.set_item("tail", r.tail)?;
    d.set_item("epsilon", r.epsilon)?;
    d.set_item("opnorm", r.opnorm)?;
    d.set_item("irreducible", r.irreducible)?;
    d.set_item("reducible", r.reducible)?;
    d.set_item("total", r.total)?;
    Ok(d.into_any().unbind())
}

#[pyfunction]
fn lower_bound_value(sys: &PyEigenSystem, m: usize, opnorm: f64) -> PyResult<f64> {
    core::lower_bound_value(&sys.inner, m, opnorm).py()
}

/// Least-squares fit of ln(error) on ln(n): (slope, intercept, r2).
#[pyfunction]
fn fit_loglog_slope(ns: Vec<f64>, errors: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = core::fit_loglog_slope(&ns, &errors).py()?;
    Ok((f.slope, f.intercept, f.r2))
}

fn output(out: ExperimentOutput) -> PyResult<(String, String)> {
    Ok((out.csv_string().py()?, out.manifest.to_string()))
}

/// Runs a convergence experiment from a TOML string; returns (results csv, manifest json).
#[pyfunction]
#[pyo3(signature = (config = ""))]
fn run_convergence_experiment(config: &str) -> PyResult<(String, String)> {
    let cfg = ExperimentConfig::from_toml_str(config).py()?;
    output(core::experiments::run_convergence_experiment(&cfg).py()?)
}

#[pyfunction]
#[pyo3(signature = (config = ""))]
fn run_gamma_sweep(config: &str) -> PyResult<(String, String)> {
    let cfg = ExperimentConfig::from_toml_str(config).py()?;
    output(core::experiments::run_gamma_sweep(&cfg).py()?)
}

#[pyfunction]
#[pyo3(signature = (config = ""))]
fn run_lower_bound_demo(config: &str) -> PyResult<(String, String)> {
    let cfg = LowerBoundConfig::from_toml_str(config).py()?;
    output(core::experiments::run_lower_bound_demo(&cfg).py()?)
}

#[pyfunction]
fn derive_seed(base: u64, tags: Vec<u64>) -> u64 {
    core::derive_seed(base, &tags)
}

#[pymodule]
fn activeop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyEigenSystem>()?;
    m.add_class::<PyOracle>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(sample_kl, m)?)?;
    m.add_function(wrap_pyfunction!(kl_project, m)?)?;
    m.add_function(wrap_pyfunction!(fit_active, m)?)?;
    m.add_function(wrap_pyfunction!(fit_passive_lsq, m)?)?;
    m.add_function(wrap_pyfunction!(upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_value, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog_slope, m)?)?;
    m.add_function(wrap_pyfunction!(run_convergence_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_gamma_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_lower_bound_demo, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
