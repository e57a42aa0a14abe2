//! Resonance of a second mode shifted by the motion of the first.
//!
//! Mode 2's stiffness follows the mean-square displacement of mode 1, so its
//! linear resonance becomes `omega2 (1 + 3/2 beta12 a1^2)` where `a1` is the
//! steady-state amplitude of mode 1. Mode 2 itself is probed weakly and kept
//! linear.

use crate::error::{ensure_finite, invalid, Result};
use crate::model::OscillatorParams;
use crate::steady_state::{hysteresis_cycle, peak_amplitude};
use crate::time_domain::SweepDirection;

/// Two mechanical modes with a cross-stiffness coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeParams {
    mode1: OscillatorParams,
    mode2: OscillatorParams,
    beta12: f64,
}

impl TwoModeParams {
    pub fn new(mode1: OscillatorParams, mode2: OscillatorParams, beta12: f64) -> Result<Self> {
        ensure_finite("beta12", beta12)?;
        if beta12 < 0.0 {
            return Err(invalid(format!("beta12 must be non-negative, got {beta12}")));
        }
        Ok(Self { mode1, mode2, beta12 })
    }

    pub fn mode1(&self) -> &OscillatorParams {
        &self.mode1
    }

    pub fn mode2(&self) -> &OscillatorParams {
        &self.mode2
    }

    pub fn beta12(&self) -> f64 {
        self.beta12
    }

    /// Mode-2 linewidth `gamma2`, rad/s.
    pub fn mode2_linewidth(&self) -> f64 {
        self.mode2.gamma()
    }
}

/// `omega2 (1 + 3/2 beta12 a1^2)`.
pub fn mode2_resonance(params: &TwoModeParams, mode1_amplitude: f64) -> Result<f64> {
    ensure_finite("mode-1 amplitude", mode1_amplitude)?;
    if mode1_amplitude < 0.0 {
        return Err(invalid(format!(
            "mode-1 amplitude must be non-negative, got {mode1_amplitude}"
        )));
    }
    let shift = 1.5 * params.beta12 * mode1_amplitude * mode1_amplitude;
    Ok(params.mode2.omega0() * (1.0 + shift))
}

/// One stop frequency of an intermodal scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    /// Mode-1 drive frequency where the sweep stopped, rad/s.
    pub omega_p: f64,
    /// Mode-1 steady-state amplitude on the followed branch, m.
    pub mode1_amplitude: f64,
    /// Shifted mode-2 resonance, rad/s.
    pub mode2_resonance: f64,
}

impl ScanPoint {
    /// Shift of mode 2 in units of its linewidth.
    pub fn shift_linewidths(&self, params: &TwoModeParams) -> f64 {
        (self.mode2_resonance - params.mode2.omega0()) / params.mode2_linewidth()
    }
}

/// Parks mode 1 at each stop frequency of `omega_p_grid`, reached by a sweep
/// in `direction`, and reports mode 2's resonance. Points are returned in
/// sweep order.
pub fn intermodal_scan(
    params: &TwoModeParams,
    mode1_drive_amp: f64,
    omega_p_grid: &[f64],
    direction: SweepDirection,
) -> Result<Vec<ScanPoint>> {
    let (up, down) = hysteresis_cycle(&params.mode1, mode1_drive_amp, omega_p_grid)?;
    let branch = match direction {
        SweepDirection::Up => up,
        SweepDirection::Down => down,
    };
    let mut points = branch
        .iter()
        .map(|b| {
            Ok(ScanPoint {
                omega_p: b.omega,
                mode1_amplitude: b.amplitude,
                mode2_resonance: mode2_resonance(params, b.amplitude)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ascending = points.len() < 2 || points[1].omega_p > points[0].omega_p;
    if ascending != (direction == SweepDirection::Up) {
        points.reverse();
    }
    Ok(points)
}

/// Coupling that makes the largest shift, reached at mode 1's resonance
/// peak for drive `mode1_drive_amp`, equal `linewidths` mode-2 linewidths.
/// The result is a fitted quantity, not a material constant.
pub fn calibrate_beta12(
    mode1: &OscillatorParams,
    mode2: &OscillatorParams,
    mode1_drive_amp: f64,
    linewidths: f64,
) -> Result<f64> {
    ensure_finite("drive amplitude", mode1_drive_amp)?;
    ensure_finite("linewidths", linewidths)?;
    if mode1_drive_amp <= 0.0 || linewidths < 0.0 {
        return Err(invalid("calibration needs a positive drive and non-negative shift"));
    }
    let a1 = peak_amplitude(mode1, mode1_drive_amp);
    Ok(linewidths / (1.5 * mode2.quality_factor() * a1 * a1))
}
