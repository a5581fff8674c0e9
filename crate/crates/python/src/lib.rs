//! Python bindings: coefficient models, growth functionals, sampling, zero
//! counting, hole-probability estimates and a few verification checks.

use holescope::growth::{self, GrowthProfile};
use holescope::holeprob::{self, AdaptSettings, EstimateResult, SamplerSettings};
use holescope::sampling::{self, SeriesSample};
use holescope::verify::{self, CirclePointSet, DeterminantCheck};
use holescope::zerocount::{self, ZeroCountResult};
use holescope::{CoefficientModel, Error, Radius};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::BadNormalization(_) | Error::NotLogConcave { .. } | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn radius(r: f64) -> PyResult<Radius> {
    Radius::new(r).map_err(to_py)
}

/// Log-concave coefficient profile `n -> log a_n`.
#[pyclass(name = "CoefficientModel", module = "pyholescope", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel(CoefficientModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn gef() -> Self {
        Self(CoefficientModel::gef())
    }

    #[staticmethod]
    fn mittag_leffler(alpha: f64) -> PyResult<Self> {
        CoefficientModel::mittag_leffler(alpha).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn gaussian_decay(c: f64) -> PyResult<Self> {
        CoefficientModel::gaussian_decay(c).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn exp_exp() -> Self {
        Self(CoefficientModel::exp_exp())
    }

    /// Finite table of `log a_n` starting with 0.
    #[staticmethod]
    fn table(log_values: Vec<f64>) -> PyResult<Self> {
        CoefficientModel::table(log_values).map(Self).map_err(to_py)
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    fn log_coeff(&self, n: usize) -> f64 {
        self.0.log_coeff(n)
    }

    /// `log a_n + n log r`.
    fn log_term(&self, r: f64, n: usize) -> PyResult<f64> {
        Ok(self.0.log_term(radius(r)?, n).value)
    }

    fn __repr__(&self) -> String {
        format!("CoefficientModel({})", self.0.label())
    }
}

/// Growth functionals at one radius.
#[pyclass(name = "GrowthProfile", module = "pyholescope", frozen, get_all)]
struct PyProfile {
    r: f64,
    log_mu: f64,
    nu: usize,
    n1: usize,
    n1_prime: f64,
    s: f64,
    /// `(m, N_{m,m+1})` pairs.
    bands: Vec<(usize, usize)>,
}

#[pymethods]
impl PyProfile {
    fn __repr__(&self) -> String {
        format!("GrowthProfile(r={}, log_mu={}, nu={}, n1={}, s={})", self.r, self.log_mu, self.nu, self.n1, self.s)
    }
}

impl From<GrowthProfile> for PyProfile {
    fn from(p: GrowthProfile) -> Self {
        Self {
            r: p.r.value(),
            log_mu: p.log_mu,
            nu: p.nu,
            n1: p.n1,
            n1_prime: p.n1_prime,
            s: p.s,
            bands: p.bands.iter().map(|b| (b.m, b.count)).collect(),
        }
    }
}

#[pyfunction]
fn growth_profile(model: &PyModel, r: f64) -> PyResult<PyProfile> {
    GrowthProfile::compute(&model.0, radius(r)?).map(PyProfile::from).map_err(to_py)
}

/// `(nu, log mu)`.
#[pyfunction]
fn max_term(model: &PyModel, r: f64) -> PyResult<(usize, f64)> {
    growth::max_term(&model.0, radius(r)?).map_err(to_py)
}

#[pyfunction]
fn s_value(model: &PyModel, r: f64) -> PyResult<f64> {
    growth::s_value(&model.0, radius(r)?).map_err(to_py)
}

#[pyfunction]
fn log_max_modulus(model: &PyModel, r: f64) -> PyResult<f64> {
    growth::log_max_modulus(&model.0, radius(r)?).map_err(to_py)
}

#[pyfunction]
fn integral_residual(model: &PyModel, r: f64) -> PyResult<f64> {
    growth::verify_integral_relation(&model.0, radius(r)?).map_err(to_py)
}

/// `phi_0 ..= phi_{n_trunc}` of one stream.
#[pyfunction]
fn sample_coefficients(seed: u64, stream: u64, n_trunc: usize) -> Vec<Complex64> {
    sampling::sample_coefficients(seed, stream, n_trunc).draws
}

#[pyfunction]
#[pyo3(signature = (model, r, log_eps = sampling::DEFAULT_LOG_EPS))]
fn choose_truncation(model: &PyModel, r: f64, log_eps: f64) -> PyResult<usize> {
    sampling::choose_truncation(&model.0, radius(r)?, log_eps).map_err(to_py)
}

#[pyclass(name = "ZeroCount", module = "pyholescope", frozen, get_all)]
struct PyZeroCount {
    count: usize,
    min_log_modulus: f64,
    certified: bool,
}

#[pymethods]
impl PyZeroCount {
    fn __repr__(&self) -> String {
        format!("ZeroCount(count={}, certified={})", self.count, if self.certified { "True" } else { "False" })
    }
}

impl From<ZeroCountResult> for PyZeroCount {
    fn from(z: ZeroCountResult) -> Self {
        Self { count: z.count, min_log_modulus: z.min_log_modulus, certified: z.is_certified() }
    }
}

/// Zeros of `sum draws[n] a_n z^n` in `|z| < r`; the draws are taken as the
/// whole series (no truncation tail).
#[pyfunction]
fn count_zeros(model: &PyModel, draws: Vec<Complex64>, r: f64) -> PyResult<PyZeroCount> {
    if draws.is_empty() {
        return Err(PyValueError::new_err("need at least one coefficient"));
    }
    let sample = SeriesSample::from_draws(draws, f64::INFINITY);
    zerocount::count_zeros_in_disk(&model.0, &sample, radius(r)?).map(PyZeroCount::from).map_err(to_py)
}

#[pyclass(name = "Estimate", module = "pyholescope", frozen, get_all)]
struct PyEstimate {
    method: String,
    log_p: f64,
    log_ci_low: f64,
    log_ci_high: f64,
    n_samples: usize,
    n_hole: usize,
    n_uncertain: usize,
    ess: Option<f64>,
    point_estimate: bool,
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!("Estimate(method={}, log_p={}, ci=[{}, {}])", self.method, self.log_p, self.log_ci_low, self.log_ci_high)
    }
}

impl From<EstimateResult> for PyEstimate {
    fn from(e: EstimateResult) -> Self {
        Self {
            method: e.method.to_string(),
            log_p: e.log_p,
            log_ci_low: e.log_ci_low,
            log_ci_high: e.log_ci_high,
            n_samples: e.n_samples,
            n_hole: e.n_hole,
            n_uncertain: e.n_uncertain,
            ess: e.ess,
            point_estimate: e.point_estimate,
        }
    }
}

/// Hole probability `P(no zeros in |z| < r)` by `method` (`"direct"`,
/// `"importance"` with an adapted proposal, or `"certificate"`).
#[pyfunction]
#[pyo3(signature = (model, r, method = "direct", n_samples = 10_000, seed = 0, threads = None))]
fn hole_probability(py: Python<'_>, model: &PyModel, r: f64, method: &str, n_samples: usize, seed: u64, threads: Option<usize>) -> PyResult<PyEstimate> {
    let method: holeprob::Method = method.parse().map_err(to_py)?;
    let r = radius(r)?;
    let model = model.0.clone();
    let mut settings = SamplerSettings::new(n_samples, seed);
    settings.threads = threads;
    py.detach(move || match method {
        holeprob::Method::Direct => holeprob::estimate_direct(&model, r, &settings),
        holeprob::Method::Certificate => holeprob::certificate_log_prob(&model, r),
        holeprob::Method::Importance => {
            let spec = holeprob::adapt_proposal(&model, r, &settings, &AdaptSettings::default())?;
            holeprob::estimate_importance(&model, r, &spec, &settings)
        }
    })
    .map(PyEstimate::from)
    .map_err(to_py)
}

/// `log det` of the coefficient covariance on `n` equispaced points of the
/// circle of radius `rho`.
#[pyfunction]
fn log_det_covariance(model: &PyModel, n: usize, rho: f64) -> PyResult<f64> {
    let set = CirclePointSet::new(n, radius(rho)?).map_err(to_py)?;
    verify::log_det_covariance(&model.0, &set).map_err(to_py)
}

/// `log det Sigma - S((1 - delta) r)` with `N_1(r)` points.
#[pyfunction]
fn determinant_margin(model: &PyModel, r: f64, delta: f64) -> PyResult<f64> {
    let r = radius(r)?;
    let (n1, _) = growth::n1_count(&model.0, r).map_err(to_py)?;
    DeterminantCheck::compute(&model.0, r, delta, n1).map(|c| c.lemma_margin()).map_err(to_py)
}

/// `(exact, bound)` for the volume of `{r in [0, t]^n : prod r_j <= s}`.
#[pyfunction]
fn volume(n: usize, t: f64, s: f64) -> PyResult<(f64, Option<f64>)> {
    verify::volume_cn(n, t, s).map(|v| (v.exact, v.bound)).map_err(to_py)
}

#[pymodule]
fn pyholescope(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyZeroCount>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(growth_profile, m)?)?;
    m.add_function(wrap_pyfunction!(max_term, m)?)?;
    m.add_function(wrap_pyfunction!(s_value, m)?)?;
    m.add_function(wrap_pyfunction!(log_max_modulus, m)?)?;
    m.add_function(wrap_pyfunction!(integral_residual, m)?)?;
    m.add_function(wrap_pyfunction!(sample_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(choose_truncation, m)?)?;
    m.add_function(wrap_pyfunction!(count_zeros, m)?)?;
    m.add_function(wrap_pyfunction!(hole_probability, m)?)?;
    m.add_function(wrap_pyfunction!(log_det_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(determinant_margin, m)?)?;
    m.add_function(wrap_pyfunction!(volume, m)?)?;
    Ok(())
}
