//! Python bindings for the qmemsim toolkit.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qmemsim::counts::CoincidenceTable;
use qmemsim::memsim::{self, Mode, Stage};
use qmemsim::metrics::{self, ChshSettings, PathNumberMatrix};
use qmemsim::qstate::{bell, Matrix};
use qmemsim::scenarios::{Fixture, RunOptions};
use qmemsim::timetags::{self, Histogram, TimeTagStream};
use qmemsim::tomography::{self, TomographyRecord, NUM_SETTINGS};

fn err(e: qmemsim::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn stage(name: &str) -> PyResult<Stage> {
    match name {
        "input" => Ok(Stage::Input),
        "output" => Ok(Stage::Output),
        _ => Err(PyValueError::new_err(format!("stage must be `input` or `output`, got `{name}`"))),
    }
}

fn mode(exact: bool) -> Mode {
    if exact { Mode::Exact } else { Mode::Sampled }
}

/// Density matrix of a finite-dimensional quantum state.
#[pyclass(name = "DensityMatrix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix(qmemsim::qstate::DensityMatrix);

#[pymethods]
impl PyDensityMatrix {
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let m = Matrix::from_rows(&rows).map_err(err)?;
        qmemsim::qstate::DensityMatrix::new(m).map(Self).map_err(err)
    }

    /// One of `psi_plus`, `singlet`, `phi_plus`, `phi_minus`.
    #[staticmethod]
    fn bell(name: &str) -> PyResult<Self> {
        let psi = match name {
            "psi_plus" => bell::psi_plus(),
            "singlet" => bell::singlet(),
            "phi_plus" => bell::phi_plus(),
            "phi_minus" => bell::phi_minus(),
            _ => return Err(PyValueError::new_err(format!("unknown Bell state `{name}`"))),
        };
        Ok(Self(qmemsim::qstate::DensityMatrix::from_pure(&psi)))
    }

    fn werner_mix(&self, p: f64) -> PyResult<Self> {
        self.0.werner_mix(p).map(Self).map_err(err)
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        self.0.matrix().rows()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn concurrence(&self) -> PyResult<f64> {
        metrics::wootters_concurrence(&self.0).map_err(err)
    }

    fn fidelity(&self, other: &PyDensityMatrix) -> PyResult<f64> {
        metrics::fidelity(&self.0, &other.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dim={}, purity={:.6})", self.0.dim(), self.0.purity())
    }
}

/// Scenario configuration loaded from TOML.
#[pyclass(name = "ScenarioConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig(memsim::ScenarioConfig);

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        memsim::ScenarioConfig::from_toml_str(text).map(Self).map_err(err)
    }

    /// The config of a built-in scenario.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Fixture::builtin(name).map(|f| Self(f.config)).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.0.to_toml_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.0.seed = seed;
    }

    #[getter]
    fn trials(&self) -> u64 {
        self.0.trials
    }

    #[setter]
    fn set_trials(&mut self, trials: u64) {
        self.0.trials = trials;
    }

    /// Validation warnings; raises on an invalid config.
    fn validate(&self) -> PyResult<Vec<String>> {
        self.0.validate().map_err(err)
    }

    fn hash_hex(&self) -> String {
        self.0.hash_hex()
    }

    /// State at `input` or `output` of the memory.
    fn state(&self, stage_name: &str) -> PyResult<PyDensityMatrix> {
        memsim::state_at(&self.0, stage(stage_name)?).map(|(rho, _)| PyDensityMatrix(rho)).map_err(err)
    }
}

fn table_dict(t: &CoincidenceTable) -> Vec<(String, f64)> {
    t.to_text().lines().filter(|l| !l.starts_with('#')).filter_map(|l| l.rsplit_once(' ')).map(|(k, v)| (k.to_string(), v.parse().unwrap_or(f64::NAN))).collect()
}

/// CHSH S from simulated counts at the given angles (default 0, π/8, π/4, 3π/8).
#[pyfunction]
#[pyo3(signature = (config, stage_name = "input", angles = None, exact = false))]
fn simulate_chsh(config: &PyConfig, stage_name: &str, angles: Option<[f64; 4]>, exact: bool) -> PyResult<(f64, Vec<(String, f64)>)> {
    let s = match angles {
        Some([a, b, ap, bp]) => ChshSettings::new(a, b, ap, bp).map_err(err)?,
        None => ChshSettings::STANDARD,
    };
    let t = memsim::simulate_chsh(&config.0, stage(stage_name)?, &s, mode(exact)).map_err(err)?;
    let value = metrics::chsh_s(&t, &s).map_err(err)?;
    Ok((value, table_dict(&t)))
}

/// The 16 tomography counts in HH, HV, ..., RR order.
#[pyfunction]
#[pyo3(signature = (config, stage_name = "input", exact = false))]
fn simulate_tomography(config: &PyConfig, stage_name: &str, exact: bool) -> PyResult<Vec<f64>> {
    memsim::simulate_tomography(&config.0, stage(stage_name)?, mode(exact)).map(|r| r.counts.to_vec()).map_err(err)
}

/// Linear-inversion reconstruction of 16 counts, projected to a physical state.
#[pyfunction]
fn reconstruct(counts: Vec<f64>) -> PyResult<PyDensityMatrix> {
    let arr: [f64; NUM_SETTINGS] =
        counts.try_into().map_err(|v: Vec<f64>| PyValueError::new_err(format!("need {NUM_SETTINGS} counts, got {}", v.len())))?;
    let rec = TomographyRecord::new(arr).map_err(err)?;
    tomography::reconstruct(&rec).map(PyDensityMatrix).map_err(err)
}

#[pyfunction]
fn path_concurrence(p00: f64, p10: f64, p01: f64, p11: f64, visibility: f64) -> PyResult<f64> {
    let m = PathNumberMatrix::new(p00, p10, p01, p11, visibility).map_err(err)?;
    metrics::path_concurrence(&m).map_err(err)
}

#[pyfunction]
fn bandwidth_from_fwhm(fwhm_ns: f64) -> PyResult<f64> {
    metrics::bandwidth_from_fwhm(fwhm_ns).map_err(err)
}

#[pyfunction]
fn far_detuning_ratio(detuning_mhz: f64, absorption_bw_mhz: f64) -> PyResult<f64> {
    metrics::far_detuning_ratio(detuning_mhz, absorption_bw_mhz).map_err(err)
}

/// Gaussian pulse fit; returns y0, A, tc, w and fwhm.
#[pyfunction]
fn fit_gaussian_pulse(centers: Vec<f64>, counts: Vec<f64>) -> PyResult<BTreeMap<&'static str, f64>> {
    let f = timetags::fit_gaussian_pulse(&Histogram::new(centers, counts).map_err(err)?).map_err(err)?;
    Ok(BTreeMap::from([("y0", f.y0), ("A", f.amplitude), ("tc", f.tc), ("w", f.w), ("fwhm", f.fwhm)]))
}

/// Normalized cross-correlation from per-channel time tags (ns).
#[pyfunction]
fn g2_cross(tags: BTreeMap<String, Vec<f64>>, a: &str, b: &str, window_ns: f64, duration_ns: f64) -> PyResult<f64> {
    let s = TimeTagStream::from_unsorted(tags).map_err(err)?;
    timetags::g2_cross(&s, a, b, window_ns, duration_ns).map_err(err)
}

/// Runs a built-in scenario; returns `(passed, report_text)`.
#[pyfunction]
#[pyo3(signature = (name, seed = None, exact = false))]
fn run_scenario(py: Python<'_>, name: &str, seed: Option<u64>, exact: bool) -> PyResult<(bool, String)> {
    let f = Fixture::builtin(name).map_err(err)?;
    let r = py.detach(|| qmemsim::scenarios::run_scenario_with(&f, RunOptions { seed, exact, resamples: None })).map_err(err)?;
    Ok((r.passed(), r.to_text()))
}

#[pyfunction]
fn builtin_scenarios() -> Vec<&'static str> {
    qmemsim::scenarios::builtin_names().collect()
}

#[pymodule]
#[pyo3(name = "qmemsim")]
fn qmemsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(simulate_chsh, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_tomography, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(path_concurrence, m)?)?;
    m.add_function(wrap_pyfunction!(bandwidth_from_fwhm, m)?)?;
    m.add_function(wrap_pyfunction!(far_detuning_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gaussian_pulse, m)?)?;
    m.add_function(wrap_pyfunction!(g2_cross, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenarios, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
