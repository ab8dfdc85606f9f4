//! Python bindings: parameters, single trajectories, the photon-statistics
//! estimators and the noiseless and stationary pump scans.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nanodimer::ensemble::{phase_aligned_state, PhaseBranch};
use nanodimer::experiments::{self, ScanSettings, StationarySettings};
use nanodimer::model::{self, transparency_pump};
use nanodimer::params_file::{params_hash, params_text};
use nanodimer::sde::{self, trajectory_rng, DEFAULT_DT};
use nanodimer::stats;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Params", from_py_object)]
#[derive(Clone)]
pub struct Params {
    inner: model::PhysicalParams,
}

#[pymethods]
impl Params {
    #[new]
    fn new() -> Self {
        Self::nanolaser()
    }

    #[staticmethod]
    fn nanolaser() -> Self {
        Self {
            inner: model::PhysicalParams::nanolaser(),
        }
    }

    #[staticmethod]
    fn macroscopic() -> Self {
        Self {
            inner: model::PhysicalParams::macroscopic(),
        }
    }

    /// Copy at a new beta with the active volume and n0 co-scaled.
    fn with_beta(&self, beta: f64) -> Self {
        Self {
            inner: self.inner.with_beta_coscaled(beta),
        }
    }

    #[staticmethod]
    fn keys() -> Vec<&'static str> {
        model::PhysicalParams::KEYS.to_vec()
    }

    fn get(&self, key: &str) -> PyResult<f64> {
        self.inner.get(key).ok_or_else(|| PyKeyError::new_err(key.to_string()))
    }

    fn set(&mut self, key: &str, value: f64) -> PyResult<()> {
        let mut next = self.inner;
        if !next.set(key, value) {
            return Err(PyKeyError::new_err(key.to_string()));
        }
        next.validate().map_err(value_err)?;
        self.inner = next;
        Ok(())
    }

    fn transparency_pump(&self) -> f64 {
        transparency_pump(&self.inner)
    }

    fn hash(&self) -> String {
        params_hash(&self.inner)
    }

    fn to_text(&self) -> String {
        params_text(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Params(beta={}, kappa={}, hash={})", self.inner.beta, self.inner.kappa, self.hash())
    }
}

/// Noiseless bonding fixed point at `pump_ratio * P0`, or `None` below threshold.
#[pyfunction]
fn bonding_fixed_point<'py>(py: Python<'py>, params: &Params, pump_ratio: f64) -> PyResult<Option<Bound<'py, PyDict>>> {
    let pump = pump_ratio * transparency_pump(&params.inner);
    match model::bonding_fixed_point(pump, &params.inner) {
        Some(s) => {
            let d = PyDict::new(py);
            d.set_item("intensity", s.intensity1())?;
            d.set_item("carriers", s.n1)?;
            Ok(Some(d))
        }
        None => Ok(None),
    }
}

/// One trajectory from the phase-aligned start, sampled every `record_stride` steps.
#[pyfunction]
#[pyo3(signature = (params, pump_ratio, steps, dt=DEFAULT_DT, record_stride=10, seed=0, noise=true, theta=std::f64::consts::FRAC_PI_4))]
#[allow(clippy::too_many_arguments)]
fn trajectory<'py>(
    py: Python<'py>,
    params: &Params,
    pump_ratio: f64,
    steps: u64,
    dt: f64,
    record_stride: usize,
    seed: u64,
    noise: bool,
    theta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params.inner;
    let cfg = sde::IntegratorConfig {
        dt,
        record_stride,
        seed,
        noise,
        ..sde::IntegratorConfig::default()
    };
    let pump = pump_ratio * transparency_pump(&p);
    let rec = py
        .detach(|| -> Result<sde::TrajectoryRecord, String> {
            let start = phase_aligned_state(pump, &p, theta, PhaseBranch::InPhase).map_err(|e| e.to_string())?;
            let schedule = model::PumpSchedule::constant(pump, steps.max(1) as f64 * dt).map_err(|e| e.to_string())?;
            sde::integrate(&start, &schedule, &p, &cfg, &mut trajectory_rng(seed, 0)).map_err(|e| e.to_string())
        })
        .map_err(PyValueError::new_err)?;
    let d = PyDict::new(py);
    d.set_item("t", &rec.times)?;
    d.set_item("I1", rec.states.iter().map(|s| s.intensity1()).collect::<Vec<_>>())?;
    d.set_item("I2", rec.states.iter().map(|s| s.intensity2()).collect::<Vec<_>>())?;
    d.set_item("n1", rec.states.iter().map(|s| s.n1).collect::<Vec<_>>())?;
    d.set_item("n2", rec.states.iter().map(|s| s.n2).collect::<Vec<_>>())?;
    d.set_item("x", rec.frames.iter().map(|f| f.map_or(f64::NAN, |f| f.x)).collect::<Vec<_>>())?;
    d.set_item("clamp_count", rec.diagnostics.clamp_count)?;
    Ok(d)
}

#[pyfunction]
fn g2_zero(samples_i: Vec<f64>, samples_j: Vec<f64>) -> PyResult<f64> {
    stats::g2_zero(&samples_i, &samples_j).map_err(value_err)
}

/// Decorrelated-intensity prediction of `g2_BA`; `None` for single-mode operation.
#[pyfunction]
fn cross_from_imbalance(g2_ii: f64, mean_x: f64, mean_x2: f64) -> PyResult<Option<f64>> {
    stats::cross_from_imbalance(g2_ii, mean_x, mean_x2)
        .map(|c| c.value())
        .map_err(value_err)
}

#[pyfunction]
fn amplitude_from_cross(g2_ba: f64) -> f64 {
    stats::amplitude_from_cross(g2_ba).mean_a
}

#[pyfunction]
fn autocorr_width(samples: Vec<f64>, dt: f64) -> PyResult<f64> {
    stats::autocorr_width(&samples, dt).map_err(value_err)
}

/// Maximum-likelihood fit of `N exp(-Lambda x)` on [-1, 1].
#[pyfunction]
fn fit_equilibrium<'py>(py: Python<'py>, samples: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let f = stats::fit_equilibrium(&samples).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("lambda", f.lambda)?;
    d.set_item("lambda_stderr", f.lambda_stderr)?;
    d.set_item("normalization", f.normalization)?;
    d.set_item("ks_statistic", f.ks_statistic)?;
    d.set_item("ks_p_value", f.ks_p_value)?;
    d.set_item("count", f.count)?;
    Ok(d)
}

fn sweep_dict<'py>(py: Python<'py>, s: &experiments::SweepResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item(&s.control, s.controls())?;
    for c in &s.columns {
        d.set_item(c, s.column(c).unwrap_or_default())?;
    }
    Ok(d)
}

/// Noiseless attractor scan; returns column name -> values plus the labels.
#[pyfunction]
#[pyo3(signature = (params, pump_ratios, max_time=6000.0))]
fn bifurcation_scan<'py>(py: Python<'py>, params: &Params, pump_ratios: Vec<f64>, max_time: f64) -> PyResult<Bound<'py, PyDict>> {
    let p = params.inner;
    let settings = ScanSettings {
        max_time,
        ..ScanSettings::default()
    };
    let r = py
        .detach(|| experiments::bifurcation_scan(&pump_ratios, &p, &settings))
        .map_err(value_err)?;
    let d = sweep_dict(py, &r.to_sweep().map_err(value_err)?)?;
    d.set_item("label", r.points.iter().map(|b| b.attractor.label()).collect::<Vec<_>>())?;
    d.set_item("hopf", r.hopf.to_vec())?;
    Ok(d)
}

/// Stationary photon statistics over a pump grid.
#[pyfunction]
#[pyo3(signature = (params, pump_ratios, n_traj=4, transient=50.0, window=200.0, seed=0, relax=false))]
fn stationary_scan<'py>(
    py: Python<'py>,
    params: &Params,
    pump_ratios: Vec<f64>,
    n_traj: usize,
    transient: f64,
    window: f64,
    seed: u64,
    relax: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params.inner;
    let settings = StationarySettings {
        n_traj,
        transient,
        window,
        master_seed: seed,
        relax: relax.then(ScanSettings::default),
        ..StationarySettings::default()
    };
    let r = py
        .detach(|| experiments::stationary_scan(&pump_ratios, &p, &settings))
        .map_err(value_err)?;
    let d = sweep_dict(py, &r.to_sweep("stationary").map_err(value_err)?)?;
    d.set_item("switching_point", r.switching_point)?;
    Ok(d)
}

#[pymodule]
fn nanodimer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_function(wrap_pyfunction!(bonding_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(g2_zero, m)?)?;
    m.add_function(wrap_pyfunction!(cross_from_imbalance, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude_from_cross, m)?)?;
    m.add_function(wrap_pyfunction!(autocorr_width, m)?)?;
    m.add_function(wrap_pyfunction!(fit_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(bifurcation_scan, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_scan, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
