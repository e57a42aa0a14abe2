//! Physical types of a single mechanical mode and the Duffing equation of
//! motion
//!
//! ```text
//! x'' + gamma x' + omega0^2 (1 + beta x^2) x = sum_k 2 amp_k cos(omega_k t + phase_k)
//! ```
//!
//! Fourier components follow the `x(t) = x~ e^{-i omega t} + c.c.` convention,
//! so a tone of amplitude `amp` has complex amplitude `amp e^{-i phase}` and a
//! displacement phasor `x~` oscillates with peak value `2 |x~|`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{ensure_finite, invalid, Result};

/// Smallest accepted number of integration steps per natural period.
pub const MIN_OVERSAMPLE: usize = 20;
/// Default number of integration steps per natural period.
pub const DEFAULT_OVERSAMPLE: usize = 40;

/// One mechanical mode: natural angular frequency, damping rate and Duffing
/// coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    omega0: f64,
    gamma: f64,
    beta: f64,
}

impl OscillatorParams {
    /// `omega0` and `gamma` in rad/s, `beta` in m^-2.
    pub fn new(omega0: f64, gamma: f64, beta: f64) -> Result<Self> {
        ensure_finite("omega0", omega0)?;
        ensure_finite("gamma", gamma)?;
        ensure_finite("beta", beta)?;
        if omega0 <= 0.0 {
            return Err(invalid(format!("omega0 must be positive, got {omega0}")));
        }
        if gamma <= 0.0 {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        if omega0 / gamma <= 1.0 {
            return Err(invalid(format!(
                "quality factor omega0/gamma must exceed 1, got {}",
                omega0 / gamma
            )));
        }
        if beta < 0.0 {
            return Err(invalid(format!(
                "beta must be non-negative (hardening only), got {beta}"
            )));
        }
        Ok(Self {
            omega0,
            gamma,
            beta,
        })
    }

    /// Builds the parameters from a natural frequency in Hz and a quality
    /// factor.
    pub fn from_frequency_q(freq_hz: f64, q: f64, beta: f64) -> Result<Self> {
        ensure_finite("frequency", freq_hz)?;
        ensure_finite("quality factor", q)?;
        if freq_hz <= 0.0 {
            return Err(invalid(format!("frequency must be positive, got {freq_hz}")));
        }
        if q <= 1.0 {
            return Err(invalid(format!("quality factor must exceed 1, got {q}")));
        }
        let omega0 = TAU * freq_hz;
        Self::new(omega0, omega0 / q, beta)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn quality_factor(&self) -> f64 {
        self.omega0 / self.gamma
    }

    /// Same mode with a different Duffing coefficient.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.omega0, self.gamma, beta)
    }

    /// Decay constant of the free-oscillation envelope, `2/gamma`.
    pub fn envelope_decay_time(&self) -> f64 {
        2.0 / self.gamma
    }

    /// Natural period `2 pi / omega0`.
    pub fn period(&self) -> f64 {
        TAU / self.omega0
    }

    /// Restoring plus damping acceleration, without any drive.
    #[inline]
    pub(crate) fn internal_acceleration(&self, x: f64, v: f64) -> f64 {
        -self.gamma * v - self.omega0 * self.omega0 * (1.0 + self.beta * x * x) * x
    }
}

/// A monochromatic actuation `2 amp cos(omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveTone {
    amp: f64,
    omega: f64,
    phase: f64,
}

impl DriveTone {
    /// `amp` is a force per unit mass (m/s^2); the phase is wrapped into
    /// `[0, 2 pi)`.
    pub fn new(amp: f64, omega: f64, phase: f64) -> Result<Self> {
        ensure_finite("drive amplitude", amp)?;
        ensure_finite("drive frequency", omega)?;
        ensure_finite("drive phase", phase)?;
        if amp < 0.0 {
            return Err(invalid(format!("drive amplitude must be >= 0, got {amp}")));
        }
        if omega <= 0.0 {
            return Err(invalid(format!("drive frequency must be positive, got {omega}")));
        }
        let mut phase = phase.rem_euclid(TAU);
        if phase >= TAU {
            phase = 0.0;
        }
        Ok(Self { amp, omega, phase })
    }

    pub fn amp(&self) -> f64 {
        self.amp
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Instantaneous force per unit mass.
    #[inline]
    pub fn force(&self, t: f64) -> f64 {
        2.0 * self.amp * (self.omega * t + self.phase).cos()
    }

    /// Complex amplitude in the `e^{-i omega t}` convention.
    pub fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.amp, -self.phase)
    }

    pub fn with_phase(&self, phase: f64) -> Result<Self> {
        Self::new(self.amp, self.omega, phase)
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.amp, omega, self.phase)
    }
}

/// Position and velocity of the mode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub x: f64,
    pub v: f64,
}

impl State {
    pub const REST: State = State { x: 0.0, v: 0.0 };

    pub fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }

    /// State at time `t` of the harmonic motion `x~ e^{-i omega t} + c.c.`.
    pub fn from_phasor(phasor: Complex64, omega: f64, t: f64) -> Self {
        let rotated = phasor * Complex64::from_polar(1.0, -omega * t);
        Self {
            x: 2.0 * rotated.re,
            v: 2.0 * (Complex64::new(0.0, -omega) * rotated).re,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite()
    }
}

/// Uniformly sampled displacement and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        ensure_finite("t0", t0)?;
        ensure_finite("dt", dt)?;
        if dt <= 0.0 {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if x.len() != v.len() {
            return Err(invalid(format!(
                "displacement and velocity lengths differ ({} vs {})",
                x.len(),
                v.len()
            )));
        }
        if x.len() < 2 {
            return Err(invalid("a trajectory needs at least two samples"));
        }
        Ok(Self { t0, dt, x, v })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn last_state(&self) -> State {
        let n = self.len() - 1;
        State::new(self.x[n], self.v[n])
    }

    /// Appends `other`, whose first sample must coincide with this
    /// trajectory's last one (that sample is not duplicated).
    pub fn concat(mut self, other: &Trajectory) -> Result<Self> {
        let rel = (other.dt - self.dt).abs() / self.dt;
        if rel > 1e-12 {
            return Err(invalid("cannot concatenate trajectories with different steps"));
        }
        let end = self.time(self.len() - 1);
        if (other.t0 - end).abs() > 1e-6 * self.dt {
            return Err(invalid("trajectories are not contiguous in time"));
        }
        self.x.extend_from_slice(&other.x[1..]);
        self.v.extend_from_slice(&other.v[1..]);
        Ok(self)
    }
}

/// Acceleration of the mode at `(x, v, t)` under the given drives.
pub fn acceleration(
    params: &OscillatorParams,
    drives: &[DriveTone],
    x: f64,
    v: f64,
    t: f64,
) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("v", v)?;
    ensure_finite("t", t)?;
    let drive: f64 = drives.iter().map(|d| d.force(t)).sum();
    Ok(drive + params.internal_acceleration(x, v))
}

/// Fractional squared-frequency shift `3 beta |x~|^2` produced by a phasor
/// of modulus `amplitude`.
pub fn epsilon(params: &OscillatorParams, amplitude: f64) -> Result<f64> {
    ensure_finite("amplitude", amplitude)?;
    if amplitude < 0.0 {
        return Err(invalid(format!("amplitude must be >= 0, got {amplitude}")));
    }
    Ok(3.0 * params.beta * amplitude * amplitude)
}

/// Phasor modulus that produces the nonlinearity strength `eps`.
pub fn amplitude_for_epsilon(params: &OscillatorParams, eps: f64) -> Result<f64> {
    ensure_finite("epsilon", eps)?;
    if eps < 0.0 {
        return Err(invalid(format!("epsilon must be >= 0, got {eps}")));
    }
    if params.beta == 0.0 {
        return if eps == 0.0 {
            Ok(0.0)
        } else {
            Err(invalid("a linear mode (beta = 0) cannot reach a nonzero epsilon"))
        };
    }
    Ok((eps / (3.0 * params.beta)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(freq_hz: f64, gamma: f64, beta: f64) -> OscillatorParams {
        OscillatorParams::new(TAU * freq_hz, gamma, beta).unwrap()
    }

    #[test]
    fn damping_term_only() {
        let p = mode(782e3, 1000.0, 0.0);
        let a = acceleration(&p, &[], 0.0, 1.0, 0.0).unwrap();
        assert_eq!(a, -1000.0);
    }

    #[test]
    fn hooke_term() {
        let p = mode(782e3, 1000.0, 0.0);
        let a = acceleration(&p, &[], 1e-9, 0.0, 0.0).unwrap();
        let w0 = TAU * 782e3;
        assert_eq!(a, -(w0 * w0) * 1e-9);
        assert!((a + 2.4141e4).abs() < 1.0, "{a}");
    }

    #[test]
    fn cubic_term_scales_restoring_force() {
        let lin = mode(782e3, 1000.0, 0.0);
        let nl = mode(782e3, 1000.0, 1e13);
        let a_lin = acceleration(&lin, &[], 10e-9, 0.0, 0.0).unwrap();
        let a_nl = acceleration(&nl, &[], 10e-9, 0.0, 0.0).unwrap();
        assert!((a_nl / a_lin - 1.001).abs() < 1e-12);
    }

    #[test]
    fn drive_uses_factor_two_convention() {
        let p = mode(1e6, 100.0, 0.0);
        let d = DriveTone::new(3.0, 1.0, 0.0).unwrap();
        let a = acceleration(&p, &[d], 0.0, 0.0, 0.0).unwrap();
        assert_eq!(a, 6.0);
    }

    #[test]
    fn epsilon_values() {
        let p = mode(1.057e6, 1000.0, 1e13);
        assert!((epsilon(&p, 1e-9).unwrap() - 3e-5).abs() < 1e-18);
        assert_eq!(epsilon(&p, 0.0).unwrap(), 0.0);
        let e = epsilon(&p, 5.77e-9).unwrap();
        assert!((e - 1e-3).abs() < 2e-6, "{e}");
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(OscillatorParams::new(1.0e6, 1.0e3, -1.0).is_err());
        assert!(OscillatorParams::new(-1.0e6, 1.0e3, 0.0).is_err());
        assert!(OscillatorParams::new(1.0e6, 0.0, 0.0).is_err());
        assert!(OscillatorParams::new(1.0e3, 2.0e3, 0.0).is_err());
        assert!(OscillatorParams::from_frequency_q(1e6, -5.0, 0.0).is_err());
        assert!(DriveTone::new(-1.0, 1.0, 0.0).is_err());
        assert!(DriveTone::new(1.0, 0.0, 0.0).is_err());
        let p = mode(1e6, 100.0, 0.0);
        assert!(acceleration(&p, &[], f64::NAN, 0.0, 0.0).is_err());
        assert!(epsilon(&p, f64::INFINITY).is_err());
    }

    #[test]
    fn phase_is_wrapped() {
        let d = DriveTone::new(1.0, 1.0, -0.5).unwrap();
        assert!((d.phase() - (TAU - 0.5)).abs() < 1e-15);
        let d = DriveTone::new(1.0, 1.0, 3.0 * TAU + 0.25).unwrap();
        assert!((d.phase() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn phasor_state_matches_cosine() {
        let ph = Complex64::from_polar(2.0, 0.3);
        let s = State::from_phasor(ph, 5.0, 0.7);
        // x = 2|x~| cos(w t - arg)
        assert!((s.x - 4.0 * (5.0 * 0.7 - 0.3f64).cos()).abs() < 1e-12);
        assert!((s.v + 20.0 * (5.0 * 0.7 - 0.3f64).sin()).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn undriven_acceleration_is_odd(x in -1e-7f64..1e-7, v in -1.0f64..1.0, beta in 0.0f64..1e15) {
                let p = mode(1.0e6, 500.0, beta);
                let a = acceleration(&p, &[], x, v, 0.0).unwrap();
                let b = acceleration(&p, &[], -x, -v, 0.0).unwrap();
                prop_assert_eq!(a, -b);
            }

            #[test]
            fn epsilon_is_quadratic(a in 0.0f64..1e-7, k in 0.0f64..10.0) {
                let p = mode(1.0e6, 500.0, 1e13);
                let lhs = epsilon(&p, k * a).unwrap();
                let rhs = k * k * epsilon(&p, a).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
            }
        }
    }
}
