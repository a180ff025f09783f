//! Python bindings for `gensm_core`.
//!
//! Complex quantities cross the boundary as Python `complex`, matrices as
//! lists of rows. AGC indices are 1-based, as in the usual notation.

use nalgebra::DVector;
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gensm_core::experiment::{self, ExperimentConfig};
use gensm_core::linalg::{CMatrix, CVector};
use gensm_core::{metrics, optimizer, system, ChannelMatrix, ChannelParams, Error};

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyArithmeticError::new_err(e.to_string()),
        3 => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for gensm_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "SystemConfig", module = "gensm", from_py_object)]
#[derive(Clone)]
struct PySystemConfig {
    inner: system::SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    #[new]
    #[pyo3(signature = (n_r, n_k, n_m, n_rf, snr_db = 0.0, sigma2 = 1.0))]
    fn new(n_r: usize, n_k: usize, n_m: usize, n_rf: usize, snr_db: f64, sigma2: f64) -> PyResult<Self> {
        let inner = system::SystemConfig::new(n_r, n_k, n_m, n_rf, sigma2, sigma2).py()?;
        Ok(PySystemConfig {
            inner: inner.with_snr_db(snr_db),
        })
    }

    /// The 8x8 link with four groups of two antennas and two RF chains.
    #[staticmethod]
    #[pyo3(signature = (snr_db = 0.0))]
    fn reference(snr_db: f64) -> Self {
        PySystemConfig {
            inner: system::SystemConfig::reference(snr_db),
        }
    }

    fn with_snr_db(&self, snr_db: f64) -> Self {
        PySystemConfig {
            inner: self.inner.with_snr_db(snr_db),
        }
    }

    fn with_partition(&self, n_k: usize, n_m: usize) -> PyResult<Self> {
        Ok(PySystemConfig {
            inner: self.inner.with_partition(n_k, n_m).py()?,
        })
    }

    #[getter]
    fn n_t(&self) -> usize {
        self.inner.n_t
    }
    #[getter]
    fn n_r(&self) -> usize {
        self.inner.n_r
    }
    #[getter]
    fn n_k(&self) -> usize {
        self.inner.n_k
    }
    #[getter]
    fn n_m(&self) -> usize {
        self.inner.n_m
    }
    #[getter]
    fn n_rf(&self) -> usize {
        self.inner.n_rf
    }
    #[getter]
    fn n_s(&self) -> usize {
        self.inner.n_s
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }
    #[getter]
    fn snr_db(&self) -> f64 {
        self.inner.snr_db()
    }
    #[getter]
    fn agc_count(&self) -> usize {
        self.inner.agc_count()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "SystemConfig(n_t={}, n_r={}, n_k={}, n_m={}, n_rf={}, snr_db={:.3})",
            c.n_t,
            c.n_r,
            c.n_k,
            c.n_m,
            c.n_rf,
            c.snr_db()
        )
    }
}

impl PySystemConfig {
    fn table(&self) -> PyResult<system::AgcTable> {
        system::enumerate_agcs(self.inner.n_m, self.inner.n_rf).py()
    }
}

#[pyclass(name = "Channel", module = "gensm", from_py_object)]
#[derive(Clone)]
struct PyChannel {
    inner: ChannelMatrix,
}

#[pymethods]
impl PyChannel {
    /// Builds a channel from a list of rows of complex numbers.
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let n_r = rows.len();
        let n_t = rows.first().map_or(0, Vec::len);
        if n_r == 0 || n_t == 0 || rows.iter().any(|r| r.len() != n_t) {
            return Err(PyValueError::new_err("channel rows must be non-empty and of equal length"));
        }
        let m = CMatrix::from_fn(n_r, n_t, |i, j| rows[i][j]);
        Ok(PyChannel {
            inner: ChannelMatrix::new(m),
        })
    }

    /// Draws a clustered channel for the link dimensions of `cfg`.
    #[staticmethod]
    #[pyo3(signature = (cfg, seed, n_cl = 8, n_ray = 10, angle_spread_deg = 7.5, element_spacing = 0.5))]
    fn sample(
        cfg: &PySystemConfig,
        seed: u64,
        n_cl: usize,
        n_ray: usize,
        angle_spread_deg: f64,
        element_spacing: f64,
    ) -> PyResult<Self> {
        let params = ChannelParams {
            n_cl,
            n_ray,
            angle_spread: angle_spread_deg.to_radians(),
            element_spacing,
            seed,
        };
        params.validate().py()?;
        Ok(PyChannel {
            inner: gensm_core::channel::sample_channel_seeded(&params, &cfg.inner),
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyChannel {
            inner: ChannelMatrix::read_text(text.as_bytes()).py()?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.as_matrix();
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_r(), self.inner.n_t())
    }

    fn frobenius_sq(&self) -> f64 {
        self.inner.frobenius_sq()
    }

    fn singular_values(&self) -> Vec<f64> {
        self.inner.singular_values()
    }
}

#[pyclass(name = "Precoder", module = "gensm", from_py_object)]
#[derive(Clone)]
struct PyPrecoder {
    inner: system::HybridPrecoder,
}

#[pymethods]
impl PyPrecoder {
    #[new]
    fn new(power: Vec<f64>, analog: Vec<Complex64>) -> Self {
        PyPrecoder {
            inner: system::HybridPrecoder::new(DVector::from_vec(power), CVector::from_vec(analog)),
        }
    }

    /// Uniform power and `A = I/sqrt(n_k)`.
    #[staticmethod]
    fn uniform(cfg: &PySystemConfig) -> Self {
        PyPrecoder {
            inner: system::HybridPrecoder::uniform(&cfg.inner, cfg.inner.agc_count()),
        }
    }

    /// Stacked power-allocation vector.
    #[getter]
    fn power(&self) -> Vec<f64> {
        self.inner.lambda.iter().copied().collect()
    }

    #[getter]
    fn analog(&self) -> Vec<Complex64> {
        self.inner.a.iter().copied().collect()
    }

    fn total_power(&self) -> f64 {
        self.inner.total_power()
    }

    fn is_feasible(&self, cfg: &PySystemConfig) -> bool {
        self.inner.satisfies_constraints(&cfg.inner, cfg.inner.agc_count())
    }

    #[pyo3(signature = (cfg, tol = 1e-12))]
    fn is_phase_only(&self, cfg: &PySystemConfig, tol: f64) -> bool {
        self.inner.analog_is_phase_only(&cfg.inner, tol)
    }

    fn __repr__(&self) -> String {
        format!("Precoder(len(power)={}, len(analog)={})", self.inner.lambda.len(), self.inner.a.len())
    }
}

#[pyclass(name = "OptimizerSettings", module = "gensm", from_py_object)]
#[derive(Clone)]
struct PyOptimizerSettings {
    #[pyo3(get, set)]
    t_b: f64,
    #[pyo3(get, set)]
    p_norm: f64,
    #[pyo3(get, set)]
    step_init: f64,
    #[pyo3(get, set)]
    backtrack_ratio: f64,
    #[pyo3(get, set)]
    armijo_c: f64,
    #[pyo3(get, set)]
    grad_tol: f64,
    #[pyo3(get, set)]
    max_inner: usize,
    #[pyo3(get, set)]
    max_outer: usize,
    #[pyo3(get, set)]
    outer_tol: f64,
}

#[pymethods]
impl PyOptimizerSettings {
    #[new]
    fn new() -> Self {
        let d = optimizer::OptimizerSettings::default();
        PyOptimizerSettings {
            t_b: d.t_b,
            p_norm: d.p_norm,
            step_init: d.step_init,
            backtrack_ratio: d.backtrack_ratio,
            armijo_c: d.armijo_c,
            grad_tol: d.grad_tol,
            max_inner: d.max_inner,
            max_outer: d.max_outer,
            outer_tol: d.outer_tol,
        }
    }
}

impl PyOptimizerSettings {
    fn settings(&self) -> optimizer::OptimizerSettings {
        optimizer::OptimizerSettings {
            t_b: self.t_b,
            p_norm: self.p_norm,
            step_init: self.step_init,
            backtrack_ratio: self.backtrack_ratio,
            armijo_c: self.armijo_c,
            grad_tol: self.grad_tol,
            max_inner: self.max_inner,
            max_outer: self.max_outer,
            outer_tol: self.outer_tol,
        }
    }
}

fn settings_or_default(s: Option<&PyOptimizerSettings>) -> optimizer::OptimizerSettings {
    s.map(PyOptimizerSettings::settings).unwrap_or_default()
}

/// The legitimate antenna-group combinations, 1-based.
#[pyfunction]
fn enumerate_agcs(n_m: usize, n_rf: usize) -> PyResult<Vec<Vec<usize>>> {
    let t = system::enumerate_agcs(n_m, n_rf).py()?;
    Ok(t.combos().to_vec())
}

#[pyfunction]
fn constant_gap(n_r: usize) -> f64 {
    metrics::constant_gap(n_r)
}

#[pyfunction]
fn se_lower_bound(h: &PyChannel, p: &PyPrecoder, cfg: &PySystemConfig) -> PyResult<f64> {
    metrics::se_lower_bound(&h.inner, &p.inner, &cfg.table()?, &cfg.inner).py()
}

#[pyfunction]
fn se_shifted_bound(h: &PyChannel, p: &PyPrecoder, cfg: &PySystemConfig) -> PyResult<f64> {
    metrics::se_shifted_bound(&h.inner, &p.inner, &cfg.table()?, &cfg.inner).py()
}

/// Monte-Carlo SE estimate; returns `(estimate, standard_error)`.
#[pyfunction]
#[pyo3(signature = (h, p, cfg, n_samples = 20000, seed = 0))]
fn se_monte_carlo(
    py: Python<'_>,
    h: &PyChannel,
    p: &PyPrecoder,
    cfg: &PySystemConfig,
    n_samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let table = cfg.table()?;
    let est = py
        .detach(|| metrics::se_monte_carlo_seeded(&h.inner, &p.inner, &table, &cfg.inner, n_samples, seed))
        .py()?;
    Ok((est.estimate, est.stderr))
}

#[pyfunction]
fn waterfilling_capacity(h: &PyChannel, cfg: &PySystemConfig) -> f64 {
    metrics::waterfilling_capacity(&h.inner, &cfg.inner)
}

/// Gradient of the lower bound in the stacked power allocation.
#[pyfunction]
fn grad_lambda(h: &PyChannel, p: &PyPrecoder, cfg: &PySystemConfig) -> PyResult<Vec<f64>> {
    let g = optimizer::grad_lambda_full(&h.inner, &p.inner, &cfg.table()?, &cfg.inner).py()?;
    Ok(g.iter().copied().collect())
}

/// Conjugate-coordinate gradient of the lower bound in the analog diagonal.
#[pyfunction]
fn grad_a(h: &PyChannel, p: &PyPrecoder, cfg: &PySystemConfig) -> PyResult<Vec<Complex64>> {
    let g = optimizer::grad_a(&h.inner, &p.inner, &cfg.table()?, &cfg.inner).py()?;
    Ok(g.iter().copied().collect())
}

/// Runs the alternating optimization; returns a dict with the precoder and
/// its trace.
#[pyfunction]
#[pyo3(signature = (h, cfg, settings = None))]
fn two_step<'py>(
    py: Python<'py>,
    h: &PyChannel,
    cfg: &PySystemConfig,
    settings: Option<&PyOptimizerSettings>,
) -> PyResult<Bound<'py, PyDict>> {
    let table = cfg.table()?;
    let s = settings_or_default(settings);
    let out = py.detach(|| optimizer::two_step(&h.inner, &table, &cfg.inner, &s)).py()?;
    let d = PyDict::new(py);
    d.set_item("precoder", PyPrecoder { inner: out.precoder.clone() })?;
    d.set_item("r_lb_trace", out.trace.r_lb_sequence())?;
    d.set_item("relaxed_r_lb", out.trace.relaxed_r_lb)?;
    d.set_item("projected_r_lb", out.trace.projected_r_lb)?;
    d.set_item("final_r_lb", out.trace.final_r_lb)?;
    d.set_item("converged", out.converged)?;
    d.set_item("monotone", out.trace.is_monotone(1e-9))?;
    d.set_item("fell_back_to_uniform", out.trace.fell_back_to_uniform)?;
    Ok(d)
}

/// Picks `(n_k, n_m)` by ensemble-average optimized lower bound; returns
/// `(selected, {(n_k, n_m): mean_r_lb})`.
#[pyfunction]
#[pyo3(signature = (cfg, channels, settings = None))]
fn select_partition<'py>(
    py: Python<'py>,
    cfg: &PySystemConfig,
    channels: Vec<PyChannel>,
    settings: Option<&PyOptimizerSettings>,
) -> PyResult<((usize, usize), Bound<'py, PyDict>)> {
    let hs: Vec<ChannelMatrix> = channels.into_iter().map(|c| c.inner).collect();
    let s = settings_or_default(settings);
    let sel = py.detach(|| optimizer::select_partition(&cfg.inner, &hs, &s)).py()?;
    let scores = PyDict::new(py);
    for sc in &sel.scores {
        scores.set_item((sc.n_k, sc.n_m), sc.mean_r_lb)?;
    }
    Ok((sel.selected, scores))
}

#[pyfunction]
fn derive_seed(master_seed: u64, index: u64, tag: u64) -> u64 {
    experiment::derive_seed(master_seed, index, tag)
}

/// Runs an experiment from config-file text; returns `(csv_body, summary)`.
/// Nothing is written to disk.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_text: &str) -> PyResult<(String, String)> {
    let cfg: ExperimentConfig = config_text.parse().py()?;
    let report = py.detach(|| experiment::run(&cfg)).py()?;
    report.check().py()?;
    Ok((report.table.to_csv_body(), report.summary))
}

#[pymodule]
fn gensm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemConfig>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyPrecoder>()?;
    m.add_class::<PyOptimizerSettings>()?;
    m.add_function(wrap_pyfunction!(enumerate_agcs, m)?)?;
    m.add_function(wrap_pyfunction!(constant_gap, m)?)?;
    m.add_function(wrap_pyfunction!(se_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(se_shifted_bound, m)?)?;
    m.add_function(wrap_pyfunction!(se_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(waterfilling_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(grad_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(grad_a, m)?)?;
    m.add_function(wrap_pyfunction!(two_step, m)?)?;
    m.add_function(wrap_pyfunction!(select_partition, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
