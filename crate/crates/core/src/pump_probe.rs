//! Response of a strongly pumped mode to a weak probe tone.
//!
//! With a pump phasor `x~_p` of nonlinearity strength `eps = 3 beta |x~_p|^2`,
//! the cubic term couples the probe line at `omega_s` to a conjugate line at
//! `omega_c = 2 omega_p - omega_s`:
//!
//! ```text
//! zeta[omega_s]  a + eps omega0^2 b* = probe
//! eps omega0^2 a + zeta[omega_c]* b* = 0
//! zeta[omega] = omega0^2 (1 + 2 eps) - omega^2 - i gamma omega0
//! ```
//!
//! where `a` is the phasor at `omega_s` and `b*` the conjugate of the phasor
//! at `omega_c`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::model::{epsilon, DriveTone, OscillatorParams, State, DEFAULT_OVERSAMPLE, MIN_OVERSAMPLE};
use crate::steady_state::{lorentzian, response_amplitudes};
use crate::time_domain::{run_tones, ToneSum, SETTLE_DRIFT_TOL};

/// Condition number above which the coupled system is reported singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest probe drive relative to the pump drive.
pub const MAX_PROBE_RATIO: f64 = 0.01;
/// Probe-pump separations closer than this many linewidths overlap.
pub const OVERLAP_LINEWIDTHS: f64 = 10.0;

/// Linearized probe and conjugate response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResponse {
    /// Phasor at the probe frequency, m.
    pub at_probe: Complex64,
    /// Conjugate of the phasor at `2 omega_p - omega_s`, m.
    pub at_conjugate: Complex64,
    /// `zeta[omega_s]`, rad^2/s^2.
    pub zeta_probe: Complex64,
    /// `zeta[2 omega_p - omega_s]`, rad^2/s^2.
    pub zeta_conj: Complex64,
    /// Condition number of the coupled 2x2 system.
    pub condition: f64,
}

/// Conjugate resonance frequencies of the probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePair {
    pub omega_plus: f64,
    pub omega_minus: f64,
}

/// `zeta[omega] = omega0^2 (1 + 2 eps) - omega^2 - i gamma omega0`.
pub fn zeta(params: &OscillatorParams, eps: f64, omega: f64) -> Complex64 {
    let w0 = params.omega0();
    Complex64::new(w0 * w0 * (1.0 + 2.0 * eps) - omega * omega, -params.gamma() * w0)
}

/// Linearized response to a real probe phasor with a real pump phasor.
pub fn linearized_probe_response(
    params: &OscillatorParams,
    eps: f64,
    omega_p: f64,
    probe_amp: f64,
    omega_s: f64,
) -> Result<ProbeResponse> {
    linearized_probe_response_with(params, eps, 0.0, omega_p, Complex64::new(probe_amp, 0.0), omega_s)
}

/// Linearized response for a pump phasor of argument `pump_phase` and a
/// complex probe phasor. The pump is rotated onto the real axis, the system
/// solved, and the solution rotated back.
pub fn linearized_probe_response_with(
    params: &OscillatorParams,
    eps: f64,
    pump_phase: f64,
    omega_p: f64,
    probe_phasor: Complex64,
    omega_s: f64,
) -> Result<ProbeResponse> {
    ensure_finite("epsilon", eps)?;
    ensure_finite("pump phase", pump_phase)?;
    ensure_finite("pump frequency", omega_p)?;
    ensure_finite("probe frequency", omega_s)?;
    ensure_finite("probe amplitude", probe_phasor.norm())?;
    if eps < 0.0 {
        return Err(invalid(format!("epsilon must be non-negative, got {eps}")));
    }
    if omega_p <= 0.0 || omega_s <= 0.0 {
        return Err(invalid("pump and probe frequencies must be positive"));
    }
    let w0 = params.omega0();
    let omega_c = 2.0 * omega_p - omega_s;
    let zs = zeta(params, eps, omega_s);
    let zc = zeta(params, eps, omega_c);
    let e = eps * w0 * w0;
    let m = [[zs, Complex64::new(e, 0.0)], [Complex64::new(e, 0.0), zc.conj()]];
    let condition = condition_number(&m);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::NearDegenerate { condition });
    }
    let rhs = probe_phasor * Complex64::from_polar(1.0, -pump_phase);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let a = rhs * m[1][1] / det;
    let b = -rhs * m[1][0] / det;
    Ok(ProbeResponse {
        at_probe: a * Complex64::from_polar(1.0, pump_phase),
        at_conjugate: b * Complex64::from_polar(1.0, -pump_phase),
        zeta_probe: zs,
        zeta_conj: zc,
        condition,
    })
}

/// Ratio of singular values of a complex 2x2 matrix.
fn condition_number(m: &[[Complex64; 2]; 2]) -> f64 {
    let fro2: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
    // s1^2 + s2^2 = |M|_F^2 and s1 s2 = |det M|.
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let s1 = ((fro2 + disc) / 2.0).sqrt();
    let s2 = det / s1;
    if s2 == 0.0 {
        f64::INFINITY
    } else {
        s1 / s2
    }
}

/// `omega_plus = omega0 (1 + eps)`, `omega_minus = 2 omega_p - omega_plus`.
pub fn conjugate_resonances(params: &OscillatorParams, eps: f64, omega_p: f64) -> Result<ConjugatePair> {
    ensure_finite("epsilon", eps)?;
    ensure_finite("pump frequency", omega_p)?;
    if eps < 0.0 {
        return Err(invalid(format!("epsilon must be non-negative, got {eps}")));
    }
    let omega_plus = params.omega0() * (1.0 + eps);
    Ok(ConjugatePair {
        omega_plus,
        omega_minus: 2.0 * omega_p - omega_plus,
    })
}

/// Peaks of `|at_conjugate|`, where the coupled system's determinant is
/// smallest: `omega_p +- sqrt(P^2 - E^2 - G^2) / (2 omega_p)` with
/// `P = omega0^2 (1 + 2 eps) - omega_p^2`, `E = eps omega0^2` and
/// `G = gamma omega0`, to first order in the detuning. `None` when the two
/// peaks merge into one at the pump frequency.
pub fn coupled_resonances(params: &OscillatorParams, eps: f64, omega_p: f64) -> Option<ConjugatePair> {
    let w0 = params.omega0();
    let p = w0 * w0 * (1.0 + 2.0 * eps) - omega_p * omega_p;
    let e = eps * w0 * w0;
    let g = params.gamma() * w0;
    let d2 = p * p - e * e - g * g;
    if d2 <= 0.0 {
        return None;
    }
    let d = d2.sqrt() / (2.0 * omega_p) * p.signum();
    Some(ConjugatePair {
        omega_plus: omega_p + d,
        omega_minus: omega_p - d,
    })
}

/// Drive amplitude that puts the steady-state response at `omega` at
/// nonlinearity strength `eps`. Inside a bistable window the amplitude is
/// reached on one of the branches only; see [`pump_branch`].
pub fn pump_amp_for_epsilon(params: &OscillatorParams, eps: f64, omega: f64) -> Result<f64> {
    ensure_finite("epsilon", eps)?;
    if eps <= 0.0 || params.beta() <= 0.0 {
        return Err(invalid("pump calibration needs eps > 0 and beta > 0"));
    }
    let u = eps / (3.0 * params.beta());
    let w0 = params.omega0();
    let d = w0 * w0 * (1.0 + eps) - omega * omega;
    let g = params.gamma() * w0;
    Ok((u * (d * d + g * g)).sqrt())
}

/// Stable steady-state branch of the pump whose amplitude is closest to
/// `target` (the phasor modulus), returned as a phasor. An infinite target
/// selects the largest stable amplitude.
pub fn pump_branch(params: &OscillatorParams, pump: &DriveTone, target: f64) -> Result<Complex64> {
    let roots = response_amplitudes(params, pump.amp(), pump.omega())?;
    let best = roots
        .iter()
        .filter(|r| r.stable)
        .min_by(|a, b| {
            if target.is_infinite() {
                b.amplitude.total_cmp(&a.amplitude)
            } else {
                (a.amplitude - target).abs().total_cmp(&(b.amplitude - target).abs())
            }
        })
        .ok_or_else(|| Error::Internal("no stable pump branch".into()))?;
    let eps = epsilon(params, best.amplitude)?;
    Ok(lorentzian(params, pump.phasor(), pump.omega(), eps))
}

/// Options for [`timedomain_mixing_check_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingOptions {
    /// Integration steps per natural period.
    pub oversample: usize,
    /// Settling before the window, in envelope decay times.
    pub settle_decay_times: f64,
    /// Minimum window length in beat periods of `|omega_p - omega_s|`.
    pub min_beat_periods: f64,
    /// Pump branch used for the seed; `None` takes the largest stable root.
    pub pump_amplitude_hint: Option<f64>,
}

impl Default for MixingOptions {
    fn default() -> Self {
        Self {
            oversample: DEFAULT_OVERSAMPLE,
            settle_decay_times: 15.0,
            min_beat_periods: 200.0,
            pump_amplitude_hint: None,
        }
    }
}

/// Fourier lines extracted from a pumped and probed trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingMeasurement {
    /// Phasor at the probe frequency, m.
    pub probe: Complex64,
    /// Conjugate of the phasor at `2 omega_p - omega_s`, m.
    pub conjugate: Complex64,
    /// Phasor at the pump frequency, m.
    pub pump: Complex64,
    /// `3 beta |pump|^2`.
    pub pump_epsilon: f64,
    /// Measurement window, s.
    pub window: f64,
    /// Probe within [`OVERLAP_LINEWIDTHS`] linewidths of the pump.
    pub overlapping: bool,
}

impl MixingMeasurement {
    /// `(|probe|, |conjugate|)`.
    pub fn magnitudes(&self) -> (f64, f64) {
        (self.probe.norm(), self.conjugate.norm())
    }
}

/// Time-domain mixing check with default options and a window of at least
/// `duration`.
pub fn timedomain_mixing_check(
    params: &OscillatorParams,
    pump: &DriveTone,
    probe: &DriveTone,
    duration: f64,
) -> Result<MixingMeasurement> {
    timedomain_mixing_check_with(params, pump, probe, duration, &MixingOptions::default())
}

/// Integrates the full equation with both tones, starting from the pump's
/// analytic branch, and extracts Hann-windowed Fourier lines at the probe,
/// conjugate and pump frequencies.
///
/// The window covers a whole number of pump periods and at least
/// `min_beat_periods` probe-pump beats, so leakage from the strong pump line
/// into the probe and conjugate lines is negligible.
pub fn timedomain_mixing_check_with(
    params: &OscillatorParams,
    pump: &DriveTone,
    probe: &DriveTone,
    duration: f64,
    opts: &MixingOptions,
) -> Result<MixingMeasurement> {
    ensure_finite("duration", duration)?;
    if duration < 0.0 {
        return Err(invalid("duration must be non-negative"));
    }
    if opts.oversample < MIN_OVERSAMPLE {
        return Err(invalid(format!("oversample must be >= {MIN_OVERSAMPLE}")));
    }
    if probe.amp() > MAX_PROBE_RATIO * pump.amp() * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "probe amplitude {:e} exceeds {MAX_PROBE_RATIO} x pump amplitude {:e}",
            probe.amp(),
            pump.amp()
        )));
    }
    let (wp, ws) = (pump.omega(), probe.omega());
    let beat = (ws - wp).abs();
    if beat == 0.0 {
        return Err(invalid("probe and pump frequencies coincide"));
    }
    let wc = 2.0 * wp - ws;
    if wc <= 0.0 {
        return Err(invalid("conjugate frequency is not positive"));
    }

    let samples = ((opts.oversample as f64 * params.omega0() / wp).max(opts.oversample as f64) - 1e-9).ceil();
    let dt = TAU / (wp * samples);
    let samples = samples as usize;
    let settle_periods = (opts.settle_decay_times * params.envelope_decay_time() * wp / TAU).ceil() as usize;
    let window_time = duration.max(opts.min_beat_periods * TAU / beat);
    let window_periods = (window_time * wp / TAU).ceil() as usize;
    let settle_steps = settle_periods * samples;
    let window_steps = window_periods * samples;

    let hint = opts.pump_amplitude_hint.unwrap_or(f64::INFINITY);
    let seed_phasor = pump_branch(params, pump, hint)?;
    let seed = State::from_phasor(seed_phasor, wp, 0.0);

    let drives = [*pump, *probe];
    let forcing = ToneSum { drives: &drives, t0: 0.0, dt };
    let state = run_tones(params, &forcing, seed, 0, settle_steps, |_, _| {})?;

    let mut acc = [Complex64::new(0.0, 0.0); 3];
    let mut weight = 0.0;
    let third = (window_periods / 3).max(1) * samples;
    let (mut early, mut late) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let freqs = [ws, wc, wp];
    let start = settle_steps;
    // Sample j of the window sits at step start + j; the taper vanishes at
    // both ends.
    let mut observe = |j: usize, x: f64| {
        let t = (start + j) as f64 * dt;
        let w = (PI * j as f64 / window_steps as f64).sin().powi(2);
        for (a, &f) in acc.iter_mut().zip(&freqs) {
            *a += Complex64::from_polar(w * x, f * t);
        }
        weight += w;
        let pump_line = Complex64::from_polar(x, wp * t);
        if j < third {
            early += pump_line;
        } else if j >= window_steps - third {
            late += pump_line;
        }
    };
    observe(0, state.x);
    run_tones(params, &forcing, state, start, window_steps - 1, |k, s| observe(k - start, s.x))?;

    let drift = (late.norm() - early.norm()).abs() / late.norm().max(early.norm()).max(f64::MIN_POSITIVE);
    if drift > SETTLE_DRIFT_TOL {
        return Err(Error::NotSettled { drift, cycles: window_periods });
    }
    let [p, c, q] = acc.map(|a| a / weight);
    Ok(MixingMeasurement {
        probe: p,
        conjugate: c.conj(),
        pump: q,
        pump_epsilon: epsilon(params, q.norm())?,
        window: window_steps as f64 * dt,
        overlapping: beat < OVERLAP_LINEWIDTHS * params.gamma(),
    })
}

/// Local maxima of `ys` over `xs`, refined by a parabola through the three
/// neighbouring samples.
pub fn find_peaks(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut peaks = Vec::new();
    if xs.len() != ys.len() || xs.len() < 3 {
        return peaks;
    }
    for i in 1..xs.len() - 1 {
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        if b > a && b >= c {
            let denom = a - 2.0 * b + c;
            let h = 0.5 * (xs[i + 1] - xs[i - 1]);
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            peaks.push(xs[i] + shift.clamp(-1.0, 1.0) * h);
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> OscillatorParams {
        OscillatorParams::from_frequency_q(782e3, 1000.0, 1e13).unwrap()
    }

    #[test]
    fn zero_eps_decouples() {
        let p = params();
        let ws = p.omega0() * 1.0003;
        let r = linearized_probe_response(&p, 0.0, p.omega0(), 2.0, ws).unwrap();
        assert_eq!(r.at_conjugate, Complex64::new(0.0, 0.0));
        let expect = lorentzian(&p, Complex64::new(2.0, 0.0), ws, 0.0);
        assert!((r.at_probe - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn probe_at_pump_is_well_posed() {
        let p = params();
        let wp = p.omega0() * 1.002;
        let r = linearized_probe_response(&p, 1e-3, wp, 1.0, wp).unwrap();
        assert!(r.at_probe.norm().is_finite() && r.at_conjugate.norm() > 0.0);
        assert_eq!(r.zeta_probe, r.zeta_conj);
    }

    #[test]
    fn near_degenerate_system_is_reported() {
        let p = params();
        let eps = 1.0 / p.quality_factor();
        let wp = p.omega0() * (1.0 + 2.0 * eps).sqrt();
        match linearized_probe_response(&p, eps, wp, 1.0, wp) {
            Err(Error::NearDegenerate { condition }) => assert!(condition > MAX_CONDITION),
            other => panic!("expected near-degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn conjugate_pair_examples() {
        let p = params();
        let w0 = p.omega0();
        let c = conjugate_resonances(&p, 0.0, 1.01 * w0).unwrap();
        assert_eq!(c.omega_plus, w0);
        assert_eq!(c.omega_minus, 2.0 * 1.01 * w0 - w0);
        let wp = w0 * (1.0 + 1e-3);
        let c = conjugate_resonances(&p, 1e-3, wp).unwrap();
        assert_eq!(c.omega_plus, c.omega_minus);
        assert!(conjugate_resonances(&p, -1e-3, wp).is_err());
    }

    #[test]
    fn cross_shift_is_twice_self_shift() {
        let p = params();
        let eps = 1e-3;
        let amp = (eps / (3.0 * p.beta())).sqrt();
        let self_shift = crate::steady_state::backbone_frequency(&p, amp).unwrap() - p.omega0();
        let cross = conjugate_resonances(&p, eps, p.omega0()).unwrap().omega_plus - p.omega0();
        assert!((cross / self_shift - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reciprocity() {
        let p = params();
        let eps = 1e-3;
        let wp = p.omega0() * (1.0 + eps) - 3.0 * p.gamma();
        let ws = wp + 2.5 * p.gamma();
        let wc = 2.0 * wp - ws;
        let a = linearized_probe_response(&p, eps, wp, 1.0, ws).unwrap();
        let b = linearized_probe_response(&p, eps, wp, 1.0, wc).unwrap();
        assert!((b.at_conjugate - a.at_conjugate.conj()).norm() < 1e-9 * a.at_conjugate.norm());
    }

    #[test]
    fn pump_phase_rotation() {
        let p = params();
        let eps = 1e-3;
        let wp = p.omega0();
        let ws = wp + 4.0 * p.gamma();
        let base = linearized_probe_response(&p, eps, wp, 1.0, ws).unwrap();
        let th = 0.7;
        // Rotating pump and probe together rotates the probe line with them
        // and the conjugate line the other way.
        let rot = linearized_probe_response_with(&p, eps, th, wp, Complex64::from_polar(1.0, th), ws).unwrap();
        let u = Complex64::from_polar(1.0, th);
        assert!((rot.at_probe - base.at_probe * u).norm() < 1e-9 * base.at_probe.norm());
        assert!((rot.at_conjugate - base.at_conjugate * u.conj()).norm() < 1e-9 * base.at_conjugate.norm());
    }

    #[test]
    fn conjugate_spectrum_peaks_at_coupled_resonances() {
        let p = params();
        let g = p.gamma();
        let eps = 1e-3;
        let wp = p.omega0() * (1.0 + eps) - 3.0 * g;
        let xs: Vec<f64> = (0..=2400).map(|i| wp - 6.0 * g + i as f64 * g / 200.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&w| linearized_probe_response(&p, eps, wp, 1.0, w).unwrap().at_conjugate.norm())
            .collect();
        let peaks = find_peaks(&xs, &ys);
        assert_eq!(peaks.len(), 2);
        let exact = coupled_resonances(&p, eps, wp).unwrap();
        let approx = conjugate_resonances(&p, eps, wp).unwrap();
        assert!((peaks[0] - exact.omega_minus).abs() < 0.01 * g);
        assert!((peaks[1] - exact.omega_plus).abs() < 0.01 * g);
        assert!((peaks[0] - approx.omega_minus).abs() < 0.1 * g);
        assert!((peaks[1] - approx.omega_plus).abs() < 0.1 * g);
    }

    #[test]
    fn find_peaks_refines_a_parabola() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -(x - 4.3) * (x - 4.3)).collect();
        let peaks = find_peaks(&xs, &ys);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0] - 4.3).abs() < 1e-12);
    }

    #[test]
    fn pump_calibration_round_trip() {
        let p = params();
        let wp = p.omega0() * 0.999;
        let amp = pump_amp_for_epsilon(&p, 1e-3, wp).unwrap();
        let pump = DriveTone::new(amp, wp, 0.0).unwrap();
        let x = pump_branch(&p, &pump, f64::INFINITY).unwrap();
        assert!((epsilon(&p, x.norm()).unwrap() / 1e-3 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn strong_probe_is_rejected() {
        let p = params();
        let pump = DriveTone::new(1e3, p.omega0(), 0.0).unwrap();
        let probe = DriveTone::new(20.0, p.omega0() * 1.001, 0.0).unwrap();
        assert!(timedomain_mixing_check(&p, &pump, &probe, 0.0).is_err());
    }

    #[test]
    fn linear_mode_has_no_conjugate_line() {
        let p = params().with_beta(0.0).unwrap();
        let g = p.gamma();
        let pump = DriveTone::new(1e3, p.omega0() - g, 0.0).unwrap();
        let probe = DriveTone::new(10.0, p.omega0() + 4.0 * g, 0.3).unwrap();
        let m = timedomain_mixing_check(&p, &pump, &probe, 0.0).unwrap();
        let expect = lorentzian(&p, probe.phasor(), probe.omega(), 0.0);
        assert!((m.probe.norm() / expect.norm() - 1.0).abs() < 0.01);
        assert!(m.conjugate.norm() < 1e-4 * m.probe.norm());
        assert!(m.overlapping);
    }

    proptest! {
        #[test]
        fn pair_is_symmetric_about_pump(eps in 0.0f64..1e-2, r in 0.9f64..1.1) {
            let p = params();
            let wp = p.omega0() * r;
            let c = conjugate_resonances(&p, eps, wp).unwrap();
            prop_assert_eq!(c.omega_minus, 2.0 * wp - c.omega_plus);
        }
    }
}
