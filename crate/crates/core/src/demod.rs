//! IQ demodulation, instantaneous frequency and the ring-down experiment.
//!
//! Quadratures are defined against a reference carrier,
//! `x(t) = X1(t) cos(w_ref t) + X2(t) sin(w_ref t)`, with absolute time so
//! records cut from one run share the reference phase.

use std::f64::consts::{PI, TAU};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::model::{epsilon, DriveTone, OscillatorParams, State, Trajectory};
use crate::steady_state::check_monotonic;
use crate::time_domain::{integrate_from, linear_grid, network_sweep_with, SweepDirection, SweepOptions};

/// Instantaneous frequency is averaged over this many carrier periods.
pub const SMOOTHING_PERIODS: f64 = 10.0;
/// Envelope validity floor relative to the reference envelope.
pub const VALIDITY_FLOOR: f64 = 1e-3;
/// Smallest `epsilon` used in the frequency-relaxation fit.
pub const FREQ_FIT_MIN_EPSILON: f64 = 1e-4;
/// Filter time constants treated as transient after a switch.
pub const TRANSIENT_TIME_CONSTANTS: f64 = 3.0;
/// Required ratio for `gamma << lp_bandwidth << omega_ref`.
pub const BANDWIDTH_SEPARATION: f64 = 5.0;

/// Demodulated quadratures of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodRecord {
    pub t0: f64,
    pub dt: f64,
    pub omega_ref: f64,
    pub lp_bandwidth: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// `sqrt(x1^2 + x2^2)`, the peak displacement (twice the phasor modulus).
    pub envelope: Vec<f64>,
    /// `None` where the envelope is below `floor` or the smoothing window
    /// runs off the record.
    pub inst_freq: Vec<Option<f64>>,
    pub floor: f64,
}

impl DemodRecord {
    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Smoothing window length in samples (even).
    pub fn smoothing_samples(&self) -> usize {
        smoothing_samples(self.omega_ref, self.dt)
    }

    /// `x1 cos(w_ref t) + x2 sin(w_ref t)`.
    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (s, c) = (self.omega_ref * self.time(i)).sin_cos();
                self.x1[i] * c + self.x2[i] * s
            })
            .collect()
    }

    fn slice(&self, start: usize, end: usize) -> DemodRecord {
        DemodRecord {
            t0: self.time(start),
            dt: self.dt,
            omega_ref: self.omega_ref,
            lp_bandwidth: self.lp_bandwidth,
            x1: self.x1[start..end].to_vec(),
            x2: self.x2[start..end].to_vec(),
            envelope: self.envelope[start..end].to_vec(),
            inst_freq: self.inst_freq[start..end].to_vec(),
            floor: self.floor,
        }
    }
}

fn smoothing_samples(omega_ref: f64, dt: f64) -> usize {
    let half = (0.5 * SMOOTHING_PERIODS * TAU / (omega_ref * dt)).round() as usize;
    2 * half.max(1)
}

/// Mixes with `2 cos` and `2 sin` of the reference and low-passes both
/// products with a single-pole filter of cutoff `lp_bandwidth` (rad/s).
pub fn iq_demodulate(traj: &Trajectory, omega_ref: f64, lp_bandwidth: f64) -> Result<DemodRecord> {
    ensure_finite("reference frequency", omega_ref)?;
    ensure_finite("filter bandwidth", lp_bandwidth)?;
    if omega_ref <= 0.0 || lp_bandwidth <= 0.0 {
        return Err(invalid("reference frequency and filter bandwidth must be positive"));
    }
    if lp_bandwidth * BANDWIDTH_SEPARATION > omega_ref {
        return Err(invalid(format!(
            "filter bandwidth {lp_bandwidth:e} rad/s is not well below the reference {omega_ref:e} rad/s"
        )));
    }
    if omega_ref * traj.dt() > PI / 2.0 {
        return Err(invalid("trajectory sampling does not resolve the reference carrier"));
    }
    let a = 1.0 - (-lp_bandwidth * traj.dt()).exp();
    let n = traj.len();
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let (mut y1, mut y2) = (0.0, 0.0);
    for (i, &x) in traj.x().iter().enumerate() {
        let (s, c) = (omega_ref * traj.time(i)).sin_cos();
        y1 += a * (2.0 * x * c - y1);
        y2 += a * (2.0 * x * s - y2);
        x1.push(y1);
        x2.push(y2);
    }
    let envelope: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a.hypot(*b)).collect();
    let floor = VALIDITY_FLOOR * envelope.iter().fold(0.0f64, |m, &e| m.max(e));
    let mut record = DemodRecord {
        t0: traj.t0(),
        dt: traj.dt(),
        omega_ref,
        lp_bandwidth,
        x1,
        x2,
        envelope,
        inst_freq: Vec::new(),
        floor,
    };
    record.inst_freq = instantaneous_frequency(&record);
    Ok(record)
}

/// `omega_ref + d/dt unwrap(atan2(-x2, x1))`, central differences averaged
/// over [`SMOOTHING_PERIODS`] carrier periods.
pub fn instantaneous_frequency(record: &DemodRecord) -> Vec<Option<f64>> {
    let n = record.len();
    if n < 3 {
        return vec![None; n];
    }
    let mut phase = Vec::with_capacity(n);
    let mut offset = 0.0;
    let mut prev = f64::NAN;
    for i in 0..n {
        let raw = (-record.x2[i]).atan2(record.x1[i]);
        if prev.is_finite() {
            let jump = raw - prev;
            if jump > PI {
                offset -= TAU;
            } else if jump < -PI {
                offset += TAU;
            }
        }
        prev = raw;
        phase.push(raw + offset);
    }
    // The mean of central differences over a window telescopes to a
    // centered difference across the whole window; spanning an exact number
    // of carrier periods cancels the mixing ripple at twice the reference.
    let half = record.smoothing_samples() / 2;
    let span = 2.0 * half as f64 * record.dt;
    let mut low = vec![0usize; n + 1];
    for i in 0..n {
        low[i + 1] = low[i] + usize::from(!(record.envelope[i] > record.floor));
    }
    (0..n)
        .map(|i| {
            if i < half || i + half >= n || low[i + half + 1] - low[i - half] > 0 {
                return None;
            }
            Some(record.omega_ref + (phase[i + half] - phase[i - half]) / span)
        })
        .collect()
}

/// Options for [`ringdown_experiment_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingdownOptions {
    /// Integration steps per natural period; the step divides the natural
    /// period exactly.
    pub oversample: usize,
    /// Demodulation filter cutoff; `None` uses `sqrt(gamma omega0)`.
    pub lp_bandwidth: Option<f64>,
    /// Settings of the preparatory upward sweep.
    pub sweep: SweepOptions,
    /// Preparatory sweep step, in units of gamma.
    pub sweep_step: f64,
    /// Preparatory sweep start below `omega0`, in units of gamma.
    pub sweep_start: f64,
}

impl Default for RingdownOptions {
    fn default() -> Self {
        Self {
            oversample: 100,
            lp_bandwidth: None,
            sweep: SweepOptions::default(),
            sweep_step: 0.2,
            sweep_start: 5.0,
        }
    }
}

/// Forced and free quadrature records around the switch-off at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingdownResult {
    /// `t <= 0`, ending at the switch-off sample.
    pub forced: DemodRecord,
    /// `t >= 0`, starting at the switch-off sample.
    pub free: DemodRecord,
    /// Envelope decay constant from a log-linear fit, s.
    pub fitted_decay_time: f64,
    /// Decay rate of `inst_freq - omega0`, 1/s; `None` when the free motion
    /// never reaches [`FREQ_FIT_MIN_EPSILON`].
    pub fitted_freq_decay_rate: Option<f64>,
    /// Filter transient excluded from the fits, s.
    pub transient_time: f64,
    /// Nonlinearity strength at the end of the transient.
    pub epsilon0: f64,
}

impl RingdownResult {
    /// First free-record index past the filter transient.
    pub fn first_clean_index(&self) -> usize {
        (self.transient_time / self.free.dt).ceil() as usize
    }
}

/// `3 beta (envelope / 2)^2`: the envelope is a peak displacement.
pub fn epsilon_from_envelope(params: &OscillatorParams, envelope: f64) -> f64 {
    epsilon(params, 0.5 * envelope.abs()).unwrap_or(f64::NAN)
}

/// Ring-down with default options.
pub fn ringdown_experiment(
    params: &OscillatorParams,
    drive: &DriveTone,
    drive_time: f64,
    free_time: f64,
    prep_sweep: bool,
) -> Result<RingdownResult> {
    ringdown_experiment_with(params, drive, drive_time, free_time, prep_sweep, &RingdownOptions::default())
}

/// Drives the mode for `drive_time`, switches the drive off at `t = 0`, lets
/// it ring for `free_time` and demodulates everything at `omega0`.
///
/// With `prep_sweep` the drive first sweeps upward from below resonance to
/// `drive.omega()`, which leaves a bistable mode on its upper branch; the
/// drive phase is then kept continuous through the forced segment.
pub fn ringdown_experiment_with(
    params: &OscillatorParams,
    drive: &DriveTone,
    drive_time: f64,
    free_time: f64,
    prep_sweep: bool,
    opts: &RingdownOptions,
) -> Result<RingdownResult> {
    ensure_finite("drive time", drive_time)?;
    ensure_finite("free time", free_time)?;
    if drive_time <= 0.0 || free_time <= 0.0 {
        return Err(invalid("drive and free times must be positive"));
    }
    let w0 = params.omega0();
    let lp = opts.lp_bandwidth.unwrap_or_else(|| (params.gamma() * w0).sqrt());
    ensure_finite("filter bandwidth", lp)?;
    if lp < BANDWIDTH_SEPARATION * params.gamma() {
        return Err(invalid(format!(
            "filter bandwidth {lp:e} rad/s is not well above gamma {:e} rad/s",
            params.gamma()
        )));
    }
    if opts.oversample < crate::model::MIN_OVERSAMPLE {
        return Err(invalid("oversample below the minimum"));
    }
    let dt = TAU / (w0 * opts.oversample as f64);
    let forced_steps = (drive_time / dt).round().max(1.0) as usize;
    let free_steps = (free_time / dt).round().max(1.0) as usize;
    let t_start = -(forced_steps as f64) * dt;

    let (seed, forced_drive) = if prep_sweep {
        let state = prepare_upper_branch(params, drive, opts)?;
        // The sweep ends with drive phase 0 at its local time origin.
        let phase = (drive.omega() * forced_steps as f64 * dt).rem_euclid(TAU);
        (state, drive.with_phase(phase)?)
    } else {
        (State::REST, *drive)
    };

    let forced = integrate_from(params, &[forced_drive], seed, t_start, forced_steps as f64 * dt, dt)?;
    let free = integrate_from(params, &[], forced.last_state(), 0.0, free_steps as f64 * dt, dt)?;
    let switch = forced.len() - 1;
    let whole = forced.concat(&free)?;

    let mut record = iq_demodulate(&whole, w0, lp)?;
    check_forced_settled(&record, switch)?;
    record.floor = VALIDITY_FLOOR * record.envelope[switch];
    record.inst_freq = instantaneous_frequency(&record);

    let forced_rec = record.slice(0, switch + 1);
    let free_rec = record.slice(switch, record.len());
    let transient_time = TRANSIENT_TIME_CONSTANTS / lp + 0.5 * free_rec.smoothing_samples() as f64 * dt;
    let first = (transient_time / dt).ceil() as usize;
    if first + 2 >= free_rec.len() {
        return Err(invalid("free segment shorter than the filter transient"));
    }

    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for i in first..free_rec.len() {
        let e = free_rec.envelope[i];
        if !(e > free_rec.floor) {
            break;
        }
        ts.push(free_rec.time(i));
        logs.push(e.ln());
    }
    let slope = fit_slope(&ts, &logs).ok_or_else(|| invalid("not enough samples for the envelope fit"))?;
    if !(slope < 0.0) {
        return Err(Error::Internal("free envelope does not decay".into()));
    }
    let fitted_decay_time = -1.0 / slope;

    let epsilon0 = epsilon_from_envelope(params, free_rec.envelope[first]);
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for i in first..free_rec.len() {
        let Some(f) = free_rec.inst_freq[i] else { break };
        let eps = epsilon_from_envelope(params, free_rec.envelope[i]);
        let shift = f - w0;
        if !(eps >= FREQ_FIT_MIN_EPSILON) || !(shift > 0.0) {
            break;
        }
        ts.push(free_rec.time(i));
        logs.push(shift.ln());
    }
    let fitted_freq_decay_rate = if ts.len() >= 16 {
        fit_slope(&ts, &logs).map(|s| -s)
    } else {
        None
    };

    Ok(RingdownResult {
        forced: forced_rec,
        free: free_rec,
        fitted_decay_time,
        fitted_freq_decay_rate,
        transient_time,
        epsilon0,
    })
}

/// Upward sweep from below resonance to the drive frequency; returns the
/// final state (drive phase 0 at the end of the sweep).
fn prepare_upper_branch(params: &OscillatorParams, drive: &DriveTone, opts: &RingdownOptions) -> Result<State> {
    let g = params.gamma();
    let target = drive.omega();
    let step = opts.sweep_step * g;
    if !(step > 0.0) {
        return Err(invalid("sweep step must be positive"));
    }
    let start = (params.omega0() - opts.sweep_start * g).min(target - step);
    let points = ((target - start) / step).ceil() as usize + 1;
    let grid = linear_grid(start, target, points.max(2))?;
    check_monotonic(&grid)?;
    let sweep = network_sweep_with(params, drive.amp(), &grid, SweepDirection::Up, State::REST, &opts.sweep)?;
    Ok(sweep.final_state)
}

/// Envelope averaged over one carrier period must not drift by more than
/// the settling tolerance over the last ten periods before the switch.
fn check_forced_settled(record: &DemodRecord, switch: usize) -> Result<()> {
    let per = (TAU / (record.omega_ref * record.dt)).round() as usize;
    let span = crate::time_domain::SETTLE_CHECK_CYCLES * per;
    if switch + 1 < span + per {
        return Ok(());
    }
    let mean = |end: usize| record.envelope[end + 1 - per..=end].iter().sum::<f64>() / per as f64;
    let last = mean(switch);
    let first = mean(switch - span + per);
    let scale = last.abs().max(first.abs());
    if scale == 0.0 {
        return Ok(());
    }
    let drift = (last - first).abs() / scale;
    if drift > crate::time_domain::SETTLE_DRIFT_TOL {
        return Err(Error::NotSettled {
            drift,
            cycles: crate::time_domain::SETTLE_CHECK_CYCLES,
        });
    }
    Ok(())
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}
