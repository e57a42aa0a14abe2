//! Python bindings: the oscillator types, the analytic steady-state and
//! pump-probe routines, the time-domain experiments and the
//! configuration-driven runner.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nlmech::config::ExperimentConfig;
use nlmech::error::Error;
use nlmech::{demod, export, intermodal, model, pump_probe, runner, steady_state, time_domain};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) => PyValueError::new_err(e.to_string()),
        Error::Divergence { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn direction(name: &str) -> PyResult<time_domain::SweepDirection> {
    match name {
        "up" => Ok(time_domain::SweepDirection::Up),
        "down" => Ok(time_domain::SweepDirection::Down),
        other => Err(PyValueError::new_err(format!("direction must be 'up' or 'down', got {other:?}"))),
    }
}

/// One mechanical mode (`omega0`, `gamma` in rad/s, `beta` in m^-2).
#[pyclass(name = "OscillatorParams", module = "nlmech", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyOscillatorParams(model::OscillatorParams);

#[pymethods]
impl PyOscillatorParams {
    #[new]
    #[pyo3(signature = (omega0, gamma, beta = 0.0))]
    fn new(omega0: f64, gamma: f64, beta: f64) -> PyResult<Self> {
        model::OscillatorParams::new(omega0, gamma, beta).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (frequency_hz, q, beta = 0.0))]
    fn from_frequency_q(frequency_hz: f64, q: f64, beta: f64) -> PyResult<Self> {
        model::OscillatorParams::from_frequency_q(frequency_hz, q, beta).map(Self).map_err(py_err)
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.0.omega0()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn quality_factor(&self) -> f64 {
        self.0.quality_factor()
    }

    #[getter]
    fn envelope_decay_time(&self) -> f64 {
        self.0.envelope_decay_time()
    }

    fn __repr__(&self) -> String {
        format!(
            "OscillatorParams(omega0={:e}, gamma={:e}, beta={:e})",
            self.0.omega0(),
            self.0.gamma(),
            self.0.beta()
        )
    }
}

/// Actuation `2 amp cos(omega t + phase)`, `amp` in m/s^2.
#[pyclass(name = "DriveTone", module = "nlmech", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyDriveTone(model::DriveTone);

#[pymethods]
impl PyDriveTone {
    #[new]
    #[pyo3(signature = (amp, omega, phase = 0.0))]
    fn new(amp: f64, omega: f64, phase: f64) -> PyResult<Self> {
        model::DriveTone::new(amp, omega, phase).map(Self).map_err(py_err)
    }

    #[getter]
    fn amp(&self) -> f64 {
        self.0.amp()
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.0.omega()
    }

    #[getter]
    fn phase(&self) -> f64 {
        self.0.phase()
    }

    /// Complex amplitude in the `e^{-i omega t}` convention.
    fn phasor(&self) -> Complex64 {
        self.0.phasor()
    }

    fn __repr__(&self) -> String {
        format!(
            "DriveTone(amp={:e}, omega={:e}, phase={})",
            self.0.amp(),
            self.0.omega(),
            self.0.phase()
        )
    }
}

/// `3 beta amplitude^2`.
#[pyfunction]
fn epsilon(params: &PyOscillatorParams, amplitude: f64) -> PyResult<f64> {
    model::epsilon(&params.0, amplitude).map_err(py_err)
}

/// Steady-state roots at `omega` as `(amplitude, stable)` pairs, ascending.
#[pyfunction]
fn response_amplitudes(params: &PyOscillatorParams, amp: f64, omega: f64) -> PyResult<Vec<(f64, bool)>> {
    let roots = steady_state::response_amplitudes(&params.0, amp, omega).map_err(py_err)?;
    Ok(roots.iter().map(|r| (r.amplitude, r.stable)).collect())
}

/// Saddle-node frequencies `(omega_lower, omega_upper)`, or `None`.
#[pyfunction]
fn bistable_region(params: &PyOscillatorParams, amp: f64) -> PyResult<Option<(f64, f64)>> {
    let r = steady_state::bistable_region(&params.0, amp).map_err(py_err)?;
    Ok(r.map(|r| (r.omega_lower, r.omega_upper)))
}

/// Up- and down-sweep branch amplitudes on `omega_grid`, in grid order.
#[pyfunction]
fn hysteresis_cycle(params: &PyOscillatorParams, amp: f64, omega_grid: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (up, down) = steady_state::hysteresis_cycle(&params.0, amp, &omega_grid).map_err(py_err)?;
    Ok((up.iter().map(|p| p.amplitude).collect(), down.iter().map(|p| p.amplitude).collect()))
}

#[pyfunction]
fn backbone_frequency(params: &PyOscillatorParams, amplitude: f64) -> PyResult<f64> {
    steady_state::backbone_frequency(&params.0, amplitude).map_err(py_err)
}

#[pyfunction]
fn peak_amplitude(params: &PyOscillatorParams, amp: f64) -> f64 {
    steady_state::peak_amplitude(&params.0, amp)
}

#[pyfunction]
fn drive_for_peak_epsilon(params: &PyOscillatorParams, eps: f64) -> PyResult<f64> {
    steady_state::drive_for_peak_epsilon(&params.0, eps).map_err(py_err)
}

#[pyfunction]
fn estimate_beta(omega0: f64, peak_omega: f64, peak_amplitude: f64) -> PyResult<f64> {
    steady_state::estimate_beta(omega0, peak_omega, peak_amplitude).map_err(py_err)
}

/// Integrates from `(x0, v0)`; returns `(t, x, v)` lists.
#[pyfunction]
#[pyo3(signature = (params, drives, x0, v0, duration, dt))]
fn integrate(
    params: &PyOscillatorParams,
    drives: Vec<PyDriveTone>,
    x0: f64,
    v0: f64,
    duration: f64,
    dt: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let tones: Vec<_> = drives.iter().map(|d| d.0).collect();
    let traj = time_domain::integrate(&params.0, &tones, x0, v0, duration, dt).map_err(py_err)?;
    let t = (0..traj.len()).map(|i| traj.time(i)).collect();
    Ok((t, traj.x().to_vec(), traj.v().to_vec()))
}

/// Settles from `(x0, v0)` and measures; returns a dict with `amplitude`,
/// `phase`, `harmonics` and `drift`.
#[pyfunction]
#[pyo3(signature = (params, drive, x0 = 0.0, v0 = 0.0, settle_cycles = None, measure_cycles = 100, oversample = model::DEFAULT_OVERSAMPLE))]
#[allow(clippy::too_many_arguments)]
fn settle_and_measure<'py>(
    py: Python<'py>,
    params: &PyOscillatorParams,
    drive: &PyDriveTone,
    x0: f64,
    v0: f64,
    settle_cycles: Option<usize>,
    measure_cycles: usize,
    oversample: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = time_domain::MeasureOptions {
        oversample,
        require_settled: true,
    };
    let settle = settle_cycles.unwrap_or_else(|| time_domain::cold_settle_cycles(&params.0));
    let seed = model::State::new(x0, v0);
    let m = py
        .detach(|| time_domain::settle_and_measure_with(&params.0, &drive.0, seed, settle, measure_cycles, &opts))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("amplitude", m.amplitude)?;
    d.set_item("phase", m.phase)?;
    d.set_item("harmonics", m.harmonics.to_vec())?;
    d.set_item("third_harmonic_ratio", m.third_harmonic_ratio())?;
    d.set_item("drift", m.drift)?;
    Ok(d)
}

/// Virtual sweep from rest; returns `(omegas, amplitudes, phases)` in sweep
/// order.
#[pyfunction]
#[pyo3(signature = (params, amp, omega_grid, direction = "up", oversample = model::DEFAULT_OVERSAMPLE, dwell_decay_times = 5.0))]
fn network_sweep(
    py: Python<'_>,
    params: &PyOscillatorParams,
    amp: f64,
    omega_grid: Vec<f64>,
    direction: &str,
    oversample: usize,
    dwell_decay_times: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let dir = self::direction(direction)?;
    let opts = time_domain::SweepOptions {
        oversample,
        dwell_decay_times,
        ..Default::default()
    };
    let r = py
        .detach(|| time_domain::network_sweep_with(&params.0, amp, &omega_grid, dir, model::State::REST, &opts))
        .map_err(py_err)?;
    Ok((
        r.omegas(),
        r.amplitudes(),
        r.points.iter().map(|p| p.phase).collect(),
    ))
}

fn record_dict<'py>(py: Python<'py>, r: &demod::DemodRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", (0..r.len()).map(|i| r.time(i)).collect::<Vec<_>>())?;
    d.set_item("x1", r.x1.clone())?;
    d.set_item("x2", r.x2.clone())?;
    d.set_item("envelope", r.envelope.clone())?;
    d.set_item("inst_freq", r.inst_freq.clone())?;
    Ok(d)
}

/// Forced then free evolution demodulated at `omega0`.
#[pyfunction]
#[pyo3(signature = (params, drive, drive_time, free_time, prep_sweep = false))]
fn ringdown_experiment<'py>(
    py: Python<'py>,
    params: &PyOscillatorParams,
    drive: &PyDriveTone,
    drive_time: f64,
    free_time: f64,
    prep_sweep: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| demod::ringdown_experiment(&params.0, &drive.0, drive_time, free_time, prep_sweep))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("forced", record_dict(py, &r.forced)?)?;
    d.set_item("free", record_dict(py, &r.free)?)?;
    d.set_item("fitted_decay_time", r.fitted_decay_time)?;
    d.set_item("fitted_freq_decay_rate", r.fitted_freq_decay_rate)?;
    d.set_item("transient_time", r.transient_time)?;
    d.set_item("epsilon0", r.epsilon0)?;
    Ok(d)
}

/// `(at_probe, at_conjugate)` phasors of the linearized pumped mode.
#[pyfunction]
fn linearized_probe_response(
    params: &PyOscillatorParams,
    eps: f64,
    omega_p: f64,
    probe_amp: f64,
    omega_s: f64,
) -> PyResult<(Complex64, Complex64)> {
    let r = pump_probe::linearized_probe_response(&params.0, eps, omega_p, probe_amp, omega_s).map_err(py_err)?;
    Ok((r.at_probe, r.at_conjugate))
}

/// `(omega_plus, omega_minus)`.
#[pyfunction]
fn conjugate_resonances(params: &PyOscillatorParams, eps: f64, omega_p: f64) -> PyResult<(f64, f64)> {
    let r = pump_probe::conjugate_resonances(&params.0, eps, omega_p).map_err(py_err)?;
    Ok((r.omega_plus, r.omega_minus))
}

#[pyfunction]
fn pump_amp_for_epsilon(params: &PyOscillatorParams, eps: f64, omega: f64) -> PyResult<f64> {
    pump_probe::pump_amp_for_epsilon(&params.0, eps, omega).map_err(py_err)
}

/// Measured `(probe, conjugate, pump)` phasors from a pumped trajectory.
#[pyfunction]
#[pyo3(signature = (params, pump, probe, duration = 0.0))]
fn timedomain_mixing_check(
    py: Python<'_>,
    params: &PyOscillatorParams,
    pump: &PyDriveTone,
    probe: &PyDriveTone,
    duration: f64,
) -> PyResult<(Complex64, Complex64, Complex64)> {
    let m = py
        .detach(|| pump_probe::timedomain_mixing_check(&params.0, &pump.0, &probe.0, duration))
        .map_err(py_err)?;
    Ok((m.probe, m.conjugate, m.pump))
}

/// Mode-2 resonance along a mode-1 sweep; returns
/// `(omega_p, mode1_amplitude, mode2_resonance)` lists in sweep order.
#[pyfunction]
#[pyo3(signature = (mode1, mode2, beta12, mode1_drive_amp, omega_p_grid, direction = "up"))]
fn intermodal_scan(
    mode1: &PyOscillatorParams,
    mode2: &PyOscillatorParams,
    beta12: f64,
    mode1_drive_amp: f64,
    omega_p_grid: Vec<f64>,
    direction: &str,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let params = intermodal::TwoModeParams::new(mode1.0, mode2.0, beta12).map_err(py_err)?;
    let pts = intermodal::intermodal_scan(&params, mode1_drive_amp, &omega_p_grid, self::direction(direction)?)
        .map_err(py_err)?;
    Ok((
        pts.iter().map(|p| p.omega_p).collect(),
        pts.iter().map(|p| p.mode1_amplitude).collect(),
        pts.iter().map(|p| p.mode2_resonance).collect(),
    ))
}

#[pyfunction]
fn calibrate_beta12(
    mode1: &PyOscillatorParams,
    mode2: &PyOscillatorParams,
    mode1_drive_amp: f64,
    linewidths: f64,
) -> PyResult<f64> {
    intermodal::calibrate_beta12(&mode1.0, &mode2.0, mode1_drive_amp, linewidths).map_err(py_err)
}

/// Runs a TOML experiment description. Returns the CSV tables as
/// `{file_name: text}` and the sidecar text; with `out_dir` the files are
/// also written there.
#[pyfunction]
#[pyo3(signature = (config_text, out_dir = None))]
fn run_config<'py>(
    py: Python<'py>,
    config_text: &str,
    out_dir: Option<PathBuf>,
) -> PyResult<(Bound<'py, PyDict>, String)> {
    let config = ExperimentConfig::from_toml_str(config_text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    config.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
    let output = py.detach(|| runner::run(&config)).map_err(py_err)?;
    if let Some(dir) = out_dir {
        export::export(&dir, &config, &output).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    }
    let tables = PyDict::new(py);
    for t in &output.tables {
        let bytes = t.to_csv().map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        tables.set_item(&t.file_name, String::from_utf8_lossy(&bytes).into_owned())?;
    }
    Ok((tables, export::metadata_text(&config, &output)))
}

#[pymodule]
#[pyo3(name = "nlmech")]
fn nlmech_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", export::TOOL_VERSION)?;
    m.add_class::<PyOscillatorParams>()?;
    m.add_class::<PyDriveTone>()?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(response_amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(bistable_region, m)?)?;
    m.add_function(wrap_pyfunction!(hysteresis_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(backbone_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(peak_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(drive_for_peak_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_beta, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(settle_and_measure, m)?)?;
    m.add_function(wrap_pyfunction!(network_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(ringdown_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(linearized_probe_response, m)?)?;
    m.add_function(wrap_pyfunction!(conjugate_resonances, m)?)?;
    m.add_function(wrap_pyfunction!(pump_amp_for_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(timedomain_mixing_check, m)?)?;
    m.add_function(wrap_pyfunction!(intermodal_scan, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_beta12, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
