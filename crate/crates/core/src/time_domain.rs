//! Fixed-step integration of the Duffing equation and the virtual
//! instruments built on it.
//!
//! Single-tone runs use a step that divides the drive period exactly, so the
//! drive is tabulated once per period, Fourier projections over whole periods
//! are leakage-free, and every segment ends with the drive phase it started
//! with. That last property is what lets a sweep hand its final state to the
//! next grid point without a phase jump.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::model::{DriveTone, OscillatorParams, State, Trajectory, DEFAULT_OVERSAMPLE, MIN_OVERSAMPLE};
use crate::steady_state::check_monotonic;

/// Envelope drift allowed over the final cycles of a settled measurement.
pub const SETTLE_DRIFT_TOL: f64 = 0.01;
/// Number of trailing drive cycles inspected for drift.
pub const SETTLE_CHECK_CYCLES: usize = 10;

/// One classical RK4 step of `x'' = f(t) + internal(x, v)` with the forcing
/// sampled at the start, middle and end of the step.
#[inline(always)]
pub(crate) fn rk4_step(p: &OscillatorParams, s: State, h: f64, f0: f64, fm: f64, f1: f64) -> State {
    let half = 0.5 * h;
    let k1x = s.v;
    let k1v = f0 + p.internal_acceleration(s.x, s.v);
    let k2x = s.v + half * k1v;
    let k2v = fm + p.internal_acceleration(s.x + half * k1x, s.v + half * k1v);
    let k3x = s.v + half * k2v;
    let k3v = fm + p.internal_acceleration(s.x + half * k2x, s.v + half * k2v);
    let k4x = s.v + h * k3v;
    let k4v = f1 + p.internal_acceleration(s.x + h * k3x, s.v + h * k3v);
    State {
        x: s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        v: s.v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    }
}

fn max_step(params: &OscillatorParams) -> f64 {
    TAU / (MIN_OVERSAMPLE as f64 * params.omega0())
}

fn check_step(params: &OscillatorParams, dt: f64) -> Result<()> {
    ensure_finite("dt", dt)?;
    if dt <= 0.0 {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    if dt > max_step(params) * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "dt = {dt:e} s under-resolves the carrier (needs <= {:e} s, {MIN_OVERSAMPLE} steps per period)",
            max_step(params)
        )));
    }
    Ok(())
}

/// Multi-tone forcing evaluated directly.
#[derive(Debug, Clone)]
pub(crate) struct ToneSum<'a> {
    pub drives: &'a [DriveTone],
    pub t0: f64,
    pub dt: f64,
}

impl ToneSum<'_> {
    #[inline]
    fn at(&self, n: f64) -> f64 {
        let t = self.t0 + n * self.dt;
        self.drives.iter().map(|d| d.force(t)).sum()
    }
}

/// Advances `steps` steps under a multi-tone drive, calling `observe` with
/// the step index (1-based) and the new state.
pub(crate) fn run_tones(
    params: &OscillatorParams,
    forcing: &ToneSum<'_>,
    mut state: State,
    first_step: usize,
    steps: usize,
    mut observe: impl FnMut(usize, State),
) -> Result<State> {
    let mut f_start = forcing.at(first_step as f64);
    for k in first_step..first_step + steps {
        let fm = forcing.at(k as f64 + 0.5);
        let f1 = forcing.at((k + 1) as f64);
        state = rk4_step(params, state, forcing.dt, f_start, fm, f1);
        if !state.is_finite() {
            return Err(Error::Divergence {
                t: forcing.t0 + (k + 1) as f64 * forcing.dt,
            });
        }
        observe(k + 1, state);
        f_start = f1;
    }
    Ok(state)
}

/// Integrates the equation of motion from `(x0, v0)` at `t = 0`.
///
/// The returned trajectory starts with the initial state and holds
/// `ceil(duration / dt) + 1` samples. Identical inputs give bit-identical
/// output.
pub fn integrate(
    params: &OscillatorParams,
    drives: &[DriveTone],
    x0: f64,
    v0: f64,
    duration: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_from(params, drives, State::new(x0, v0), 0.0, duration, dt)
}

/// Same as [`integrate`] with an explicit start time.
pub fn integrate_from(
    params: &OscillatorParams,
    drives: &[DriveTone],
    initial: State,
    t0: f64,
    duration: f64,
    dt: f64,
) -> Result<Trajectory> {
    ensure_finite("x0", initial.x)?;
    ensure_finite("v0", initial.v)?;
    ensure_finite("t0", t0)?;
    ensure_finite("duration", duration)?;
    if duration <= 0.0 {
        return Err(invalid(format!("duration must be positive, got {duration}")));
    }
    check_step(params, dt)?;
    let steps = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    xs.push(initial.x);
    vs.push(initial.v);
    let forcing = ToneSum { drives, t0, dt };
    run_tones(params, &forcing, initial, 0, steps, |_, s| {
        xs.push(s.x);
        vs.push(s.v);
    })?;
    Trajectory::new(t0, dt, xs, vs)
}

/// Drive tabulated over one period of `samples` steps.
#[derive(Debug, Clone)]
pub(crate) struct PeriodicDrive {
    pub samples: usize,
    pub dt: f64,
    start: Vec<f64>,
    mid: Vec<f64>,
    /// `e^{i 2 pi n / samples}`, the projection kernel.
    kernel: Vec<Complex64>,
}

impl PeriodicDrive {
    pub fn new(params: &OscillatorParams, drive: &DriveTone, oversample: usize) -> Result<Self> {
        if oversample < MIN_OVERSAMPLE {
            return Err(invalid(format!(
                "oversample must be >= {MIN_OVERSAMPLE}, got {oversample}"
            )));
        }
        let ratio = oversample as f64 * params.omega0() / drive.omega();
        let samples = ((ratio - 1e-9).ceil() as usize).max(MIN_OVERSAMPLE);
        let dt = TAU / (drive.omega() * samples as f64);
        let n = samples as f64;
        let force = |k: f64| 2.0 * drive.amp() * (TAU * k / n + drive.phase()).cos();
        let start = (0..samples).map(|k| force(k as f64)).collect();
        let mid = (0..samples).map(|k| force(k as f64 + 0.5)).collect();
        let kernel = (0..samples)
            .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / n))
            .collect();
        Ok(Self {
            samples,
            dt,
            start,
            mid,
            kernel,
        })
    }

    /// Integrates whole periods, calling `observe(k, state)` after each step
    /// where `k` is the phase index of the new sample.
    pub fn run_cycles(
        &self,
        params: &OscillatorParams,
        mut state: State,
        cycles: usize,
        mut observe: impl FnMut(usize, State),
    ) -> Result<State> {
        let n = self.samples;
        for c in 0..cycles {
            for k in 0..n {
                let next = if k + 1 == n { 0 } else { k + 1 };
                state = rk4_step(params, state, self.dt, self.start[k], self.mid[k], self.start[next]);
                if !state.is_finite() {
                    return Err(Error::Divergence {
                        t: ((c * n + k + 1) as f64) * self.dt,
                    });
                }
                observe(next, state);
            }
        }
        Ok(state)
    }
}

/// Options for [`settle_and_measure_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureOptions {
    /// Integration steps per natural period (at least [`MIN_OVERSAMPLE`]).
    pub oversample: usize,
    /// Fail with [`Error::NotSettled`] when the envelope still drifts.
    pub require_settled: bool,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            oversample: DEFAULT_OVERSAMPLE,
            require_settled: true,
        }
    }
}

/// Steady-state Fourier content extracted by [`settle_and_measure`].
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// `|x~|` at the drive frequency, m.
    pub amplitude: f64,
    /// Phase of the response relative to the drive phasor, rad. The linear
    /// oscillator gives a value in `(0, pi)`.
    pub phase: f64,
    /// Fourier components at 1, 2 and 3 times the drive frequency.
    pub harmonics: [Complex64; 3],
    /// Relative envelope change over the final [`SETTLE_CHECK_CYCLES`] cycles.
    pub drift: f64,
    pub final_state: State,
    pub dt: f64,
}

impl Measurement {
    /// `|x~[3 omega]| / |x~[omega]|`.
    pub fn third_harmonic_ratio(&self) -> f64 {
        self.harmonics[2].norm() / self.harmonics[0].norm()
    }
}

/// Minimum settling length, in drive cycles, for a run started far from
/// steady state: `20 Q / (2 pi)`.
pub fn cold_settle_cycles(params: &OscillatorParams) -> usize {
    (20.0 * params.quality_factor() / TAU).ceil() as usize
}

/// Integrates from `seed`, discards `settle_cycles` drive periods and
/// projects the next `measure_cycles` periods onto the drive frequency.
///
/// A cold start needs at least [`cold_settle_cycles`] of settling; a seed
/// taken from the analytic branch needs far fewer.
pub fn settle_and_measure(
    params: &OscillatorParams,
    drive: &DriveTone,
    seed: State,
    settle_cycles: usize,
    measure_cycles: usize,
) -> Result<Measurement> {
    settle_and_measure_with(params, drive, seed, settle_cycles, measure_cycles, &MeasureOptions::default())
}

pub fn settle_and_measure_with(
    params: &OscillatorParams,
    drive: &DriveTone,
    seed: State,
    settle_cycles: usize,
    measure_cycles: usize,
    opts: &MeasureOptions,
) -> Result<Measurement> {
    ensure_finite("seed x", seed.x)?;
    ensure_finite("seed v", seed.v)?;
    if measure_cycles == 0 {
        return Err(invalid("measure_cycles must be at least 1"));
    }
    if opts.require_settled && measure_cycles < SETTLE_CHECK_CYCLES {
        return Err(invalid(format!(
            "settling check needs at least {SETTLE_CHECK_CYCLES} measured cycles"
        )));
    }
    let table = PeriodicDrive::new(params, drive, opts.oversample)?;
    let state = table.run_cycles(params, seed, settle_cycles, |_, _| {})?;

    let n = table.samples;
    let mut sums = [Complex64::new(0.0, 0.0); 3];
    let mut cycle_sum = Complex64::new(0.0, 0.0);
    let mut cycle_amps = Vec::with_capacity(measure_cycles);
    let mut in_cycle = 0usize;
    let kernel = &table.kernel;
    // The sample at the start of the window (phase index 0) is the settled
    // state; the projection covers indices 0..n of every cycle.
    let mut prev = state;
    let final_state = table.run_cycles(params, state, measure_cycles, |k, s| {
        let idx = if k == 0 { n - 1 } else { k - 1 };
        let x = prev.x;
        prev = s;
        let e1 = kernel[idx];
        let e2 = kernel[(2 * idx) % n];
        let e3 = kernel[(3 * idx) % n];
        sums[0] += e1 * x;
        sums[1] += e2 * x;
        sums[2] += e3 * x;
        cycle_sum += e1 * x;
        in_cycle += 1;
        if in_cycle == n {
            cycle_amps.push(cycle_sum.norm() / n as f64);
            cycle_sum = Complex64::new(0.0, 0.0);
            in_cycle = 0;
        }
    })?;

    let total = (n * measure_cycles) as f64;
    let harmonics = sums.map(|s| s / total);
    let fundamental = harmonics[0];
    let phase = (fundamental * Complex64::from_polar(1.0, drive.phase())).arg();

    let drift = if cycle_amps.len() >= SETTLE_CHECK_CYCLES {
        let last = cycle_amps[cycle_amps.len() - 1];
        let first = cycle_amps[cycle_amps.len() - SETTLE_CHECK_CYCLES];
        if last == 0.0 && first == 0.0 {
            0.0
        } else {
            (last - first).abs() / last.abs().max(first.abs())
        }
    } else {
        0.0
    };
    if opts.require_settled && drift > SETTLE_DRIFT_TOL {
        return Err(Error::NotSettled {
            drift,
            cycles: SETTLE_CHECK_CYCLES,
        });
    }
    Ok(Measurement {
        amplitude: fundamental.norm(),
        phase,
        harmonics,
        drift,
        final_state,
        dt: table.dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Up,
    Down,
}

impl SweepDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        }
    }
}

/// Options for [`network_sweep_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Dwell per grid point in envelope decay times (`2/gamma`).
    pub dwell_decay_times: f64,
    /// Cycles projected at the end of each dwell.
    pub measure_cycles: usize,
    pub oversample: usize,
    /// Settling for the first point; `None` uses [`cold_settle_cycles`].
    pub initial_settle_cycles: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            dwell_decay_times: 5.0,
            measure_cycles: 100,
            oversample: DEFAULT_OVERSAMPLE,
            initial_settle_cycles: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub omega: f64,
    /// Measured `|x~|`, m.
    pub amplitude: f64,
    /// Response phase relative to the drive, rad.
    pub phase: f64,
}

/// Amplitudes measured point by point during a virtual sweep, in sweep
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub direction: SweepDirection,
    /// Drive cycles spent at each point after the first.
    pub dwell_cycles: usize,
    /// State at the end of the last point, at drive phase zero.
    pub final_state: State,
}

/// A discontinuity in a swept response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    /// Last grid point before the jump.
    pub omega_before: f64,
    /// First grid point after the jump.
    pub omega_after: f64,
    /// Amplitude ratio across the jump (always >= 1).
    pub ratio: f64,
}

impl SweepResult {
    pub fn omegas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.omega).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.amplitude).collect()
    }

    /// Largest jump in the sweep direction (down for an up-sweep, up for a
    /// down-sweep), if its amplitude ratio exceeds `min_ratio`.
    pub fn jump(&self, min_ratio: f64) -> Option<Jump> {
        let mut best: Option<Jump> = None;
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let ratio = match self.direction {
                SweepDirection::Up => a.amplitude / b.amplitude,
                SweepDirection::Down => b.amplitude / a.amplitude,
            };
            if ratio.is_finite() && ratio > min_ratio && best.is_none_or(|j| ratio > j.ratio) {
                best = Some(Jump {
                    omega_before: a.omega,
                    omega_after: b.omega,
                    ratio,
                });
            }
        }
        best
    }

    /// Point of largest measured amplitude.
    pub fn peak(&self) -> Option<SweepPoint> {
        self.points
            .iter()
            .copied()
            .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    }
}

/// Virtual network-analyzer sweep with default options.
pub fn network_sweep(
    params: &OscillatorParams,
    amp: f64,
    omega_grid: &[f64],
    direction: SweepDirection,
) -> Result<SweepResult> {
    network_sweep_with(params, amp, omega_grid, direction, State::REST, &SweepOptions::default())
}

/// Sweeps the drive over `omega_grid` in `direction`, handing the final state
/// of each point to the next one.
pub fn network_sweep_with(
    params: &OscillatorParams,
    amp: f64,
    omega_grid: &[f64],
    direction: SweepDirection,
    initial: State,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    check_monotonic(omega_grid)?;
    ensure_finite("dwell", opts.dwell_decay_times)?;
    if opts.dwell_decay_times <= 0.0 {
        return Err(invalid("dwell must be positive"));
    }
    if opts.measure_cycles == 0 {
        return Err(invalid("measure_cycles must be at least 1"));
    }
    let mut grid = omega_grid.to_vec();
    let ascending = grid.len() < 2 || grid[1] > grid[0];
    if ascending != (direction == SweepDirection::Up) {
        grid.reverse();
    }

    let dwell_time = opts.dwell_decay_times * params.envelope_decay_time();
    let measure = MeasureOptions {
        oversample: opts.oversample,
        require_settled: false,
    };
    let mut state = initial;
    let mut points = Vec::with_capacity(grid.len());
    let mut dwell_cycles = 0;
    for (i, &omega) in grid.iter().enumerate() {
        let drive = DriveTone::new(amp, omega, 0.0)?;
        let dwell = (dwell_time * omega / TAU).ceil() as usize;
        let settle = if i == 0 {
            opts.initial_settle_cycles
                .unwrap_or_else(|| cold_settle_cycles(params))
                .max(dwell)
        } else {
            dwell_cycles = dwell;
            dwell
        };
        let m = settle_and_measure_with(params, &drive, state, settle, opts.measure_cycles, &measure)?;
        state = m.final_state;
        points.push(SweepPoint {
            omega,
            amplitude: m.amplitude,
            phase: m.phase,
        });
    }
    Ok(SweepResult {
        points,
        direction,
        dwell_cycles,
        final_state: state,
    })
}

/// Evenly spaced frequencies from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    ensure_finite("grid start", start)?;
    ensure_finite("grid stop", stop)?;
    if points < 2 {
        return Err(invalid("a grid needs at least two points"));
    }
    if start == stop {
        return Err(invalid("grid start and stop coincide"));
    }
    let step = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|i| start + step * i as f64).collect())
}
