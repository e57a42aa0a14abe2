//! Experiment runners: one configuration in, tables and derived quantities
//! out. Independent drive levels and probe points run in parallel; results
//! are collected in input order, so output does not depend on scheduling.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::config::{drive_amp, sweep_levels, Direction, ExperimentConfig, Kind, SeedBranch};
use crate::demod::{ringdown_experiment_with, DemodRecord, RingdownOptions};
use crate::error::{invalid, Result};
use crate::export::{Cell, RunOutput, Table};
use crate::intermodal::{intermodal_scan, ScanPoint};
use crate::model::{epsilon, DriveTone, OscillatorParams, State, DEFAULT_OVERSAMPLE};
use crate::pump_probe::{
    conjugate_resonances, coupled_resonances, linearized_probe_response, pump_amp_for_epsilon,
    timedomain_mixing_check_with, MixingOptions,
};
use crate::steady_state::{
    bistable_region, branch_phasor, hysteresis_cycle, peak_amplitude, response_amplitudes,
};
use crate::time_domain::{
    cold_settle_cycles, linear_grid, network_sweep_with, settle_and_measure_with, MeasureOptions, SweepDirection,
    SweepOptions,
};

/// Runs the experiment selected by `config.kind`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate().map_err(|e| invalid(e.to_string()))?;
    let params = config.oscillator_params().map_err(|e| invalid(e.to_string()))?;
    let mut derived = toml::Table::new();
    derived.insert("omega0_rad_s".into(), params.omega0().into());
    derived.insert("gamma_rad_s".into(), params.gamma().into());
    derived.insert("q".into(), params.quality_factor().into());
    derived.insert("envelope_decay_time_s".into(), params.envelope_decay_time().into());
    let tables = match config.kind {
        Kind::Steady => run_steady(config, &params, &mut derived)?,
        Kind::Sweep => run_sweep(config, &params, &mut derived)?,
        Kind::Ringdown => run_ringdown(config, &params, &mut derived)?,
        Kind::Pumpprobe => run_pumpprobe(config, &params, &mut derived)?,
        Kind::Intermodal => run_intermodal(config, &mut derived)?,
    };
    Ok(RunOutput { tables, derived })
}

fn hz(omega: f64) -> f64 {
    omega / TAU
}

fn oversample(config: &ExperimentConfig) -> usize {
    config.integration.oversample.unwrap_or(DEFAULT_OVERSAMPLE)
}

fn level_table(params: &OscillatorParams, amp: f64) -> Result<toml::Table> {
    let mut t = toml::Table::new();
    t.insert("drive_amp_m_s2".into(), amp.into());
    t.insert("peak_amplitude_m".into(), peak_amplitude(params, amp).into());
    t.insert("peak_epsilon".into(), epsilon(params, peak_amplitude(params, amp))?.into());
    if let Some(r) = bistable_region(params, amp)? {
        t.insert("saddle_lower_rad_s".into(), r.omega_lower.into());
        t.insert("saddle_upper_rad_s".into(), r.omega_upper.into());
    }
    Ok(t)
}

/// Seed on the requested analytic branch at `omega`.
fn branch_seed(params: &OscillatorParams, drive: &DriveTone, branch: SeedBranch) -> Result<State> {
    let roots = response_amplitudes(params, drive.amp(), drive.omega())?;
    let root = match branch {
        SeedBranch::Upper => roots[roots.len() - 1],
        SeedBranch::Lower => roots[0],
    };
    let phasor = branch_phasor(params, drive.phasor(), drive.omega(), root.amplitude)?;
    Ok(State::from_phasor(phasor, drive.omega(), 0.0))
}

fn run_steady(config: &ExperimentConfig, params: &OscillatorParams, derived: &mut toml::Table) -> Result<Vec<Table>> {
    let s = config.steady.as_ref().expect("validated");
    let amp = drive_amp(params, "steady", s.amp, s.peak_epsilon).map_err(|e| invalid(e.to_string()))?;
    derived.insert("level".into(), toml::Value::Table(level_table(params, amp)?));
    let grid = linear_grid(TAU * s.f_start_hz, TAU * s.f_stop_hz, s.points)?;
    let branch = config.output.seed_branch.unwrap_or(SeedBranch::Upper);
    let opts = MeasureOptions {
        oversample: oversample(config),
        require_settled: true,
    };
    let settle = config.integration.settle_cycles.unwrap_or_else(|| cold_settle_cycles(params));
    let measure_cycles = config.integration.measure_cycles;
    let rows = grid
        .par_iter()
        .map(|&omega| {
            let roots = response_amplitudes(params, amp, omega)?;
            let middle = (roots.len() == 3).then(|| roots[1].amplitude);
            let mut row: Vec<Cell> = vec![
                omega.into(),
                hz(omega).into(),
                Cell::Int(roots.len() as i64),
                roots[roots.len() - 1].amplitude.into(),
                middle.into(),
                roots[0].amplitude.into(),
            ];
            if s.time_domain {
                let drive = DriveTone::new(amp, omega, 0.0)?;
                let seed = branch_seed(params, &drive, branch)?;
                let m = settle_and_measure_with(params, &drive, seed, settle, measure_cycles, &opts)?;
                row.extend([m.amplitude.into(), m.phase.into(), m.third_harmonic_ratio().into()]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["omega_rad_s", "freq_hz", "n_roots", "upper_m", "middle_m", "lower_m"];
    if s.time_domain {
        header.extend(["measured_m", "measured_phase_rad", "third_harmonic_ratio"]);
    }
    let mut t = Table::new("steady.csv", &header);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(vec![t])
}

/// Sweep grid from the configuration, in rad/s.
pub fn sweep_grid(config: &ExperimentConfig, params: &OscillatorParams) -> Result<Vec<f64>> {
    let s = config.sweep.as_ref().ok_or_else(|| invalid("no sweep table"))?;
    let (a, b) = (TAU * s.f_start_hz, TAU * s.f_stop_hz);
    match (s.step_gamma, s.points) {
        (Some(step), _) => {
            let h = step * params.gamma();
            let n = ((b - a) / h * (1.0 + 1e-12)).floor() as usize + 1;
            if n < 2 {
                return Err(invalid("sweep range shorter than one step"));
            }
            Ok((0..n).map(|i| a + i as f64 * h).collect())
        }
        (None, Some(n)) => linear_grid(a, b, n),
        (None, None) => Err(invalid("sweep grid unspecified")),
    }
}

fn run_sweep(config: &ExperimentConfig, params: &OscillatorParams, derived: &mut toml::Table) -> Result<Vec<Table>> {
    let s = config.sweep.as_ref().expect("validated");
    let levels = sweep_levels(params, s).map_err(|e| invalid(e.to_string()))?;
    let grid = sweep_grid(config, params)?;
    let opts = SweepOptions {
        dwell_decay_times: config.integration.dwell_decay_times,
        measure_cycles: config.integration.measure_cycles,
        oversample: oversample(config),
        initial_settle_cycles: config.integration.settle_cycles,
    };
    let tasks: Vec<(usize, Direction)> = (0..levels.len())
        .flat_map(|i| s.directions.iter().map(move |&d| (i, d)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(i, dir)| {
            let amp = levels[i];
            let direction = match dir {
                Direction::Up => SweepDirection::Up,
                Direction::Down => SweepDirection::Down,
            };
            let first = match direction {
                SweepDirection::Up => grid[0],
                SweepDirection::Down => grid[grid.len() - 1],
            };
            let initial = match config.output.seed_branch {
                Some(b) => branch_seed(params, &DriveTone::new(amp, first, 0.0)?, b)?,
                None => State::REST,
            };
            let sweep = network_sweep_with(params, amp, &grid, direction, initial, &opts)?;
            let (up, down) = hysteresis_cycle(params, amp, &sweep.omegas())?;
            let mut t = Table::new(
                format!("sweep_level{}_{}.csv", i + 1, direction.as_str()),
                &["omega_rad_s", "freq_hz", "amplitude_m", "phase_rad", "analytic_up_m", "analytic_down_m"],
            );
            for ((p, u), d) in sweep.points.iter().zip(&up).zip(&down) {
                t.push(vec![
                    p.omega.into(),
                    hz(p.omega).into(),
                    p.amplitude.into(),
                    p.phase.into(),
                    u.amplitude.into(),
                    d.amplitude.into(),
                ]);
            }
            let jump = sweep.jump(JUMP_RATIO);
            Ok((t, jump))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut level_tables = Vec::with_capacity(levels.len());
    for (i, &amp) in levels.iter().enumerate() {
        let mut lt = level_table(params, amp)?;
        for ((li, dir), (_, jump)) in tasks.iter().zip(&results) {
            if *li == i {
                if let Some(j) = jump {
                    let key = match dir {
                        Direction::Up => "jump_up_sweep_rad_s",
                        Direction::Down => "jump_down_sweep_rad_s",
                    };
                    lt.insert(key.into(), toml::Value::Array(vec![j.omega_before.into(), j.omega_after.into()]));
                }
            }
        }
        level_tables.push(toml::Value::Table(lt));
    }
    derived.insert("grid_step_rad_s".into(), (grid[1] - grid[0]).into());
    derived.insert("levels".into(), toml::Value::Array(level_tables));
    Ok(results.into_iter().map(|(t, _)| t).collect())
}

/// Amplitude ratio that counts as a jump in a swept response.
pub const JUMP_RATIO: f64 = 1.5;

fn demod_table(name: &str, r: &DemodRecord, downsample: usize) -> Table {
    let mut t = Table::new(name, &["t_s", "x1_m", "x2_m", "envelope_m", "inst_freq_rad_s"]);
    for i in (0..r.len()).step_by(downsample) {
        t.push(vec![
            r.time(i).into(),
            r.x1[i].into(),
            r.x2[i].into(),
            r.envelope[i].into(),
            r.inst_freq[i].into(),
        ]);
    }
    t
}

fn run_ringdown(config: &ExperimentConfig, params: &OscillatorParams, derived: &mut toml::Table) -> Result<Vec<Table>> {
    let r = config.ringdown.as_ref().expect("validated");
    let amp = drive_amp(params, "ringdown", r.amp, r.peak_epsilon).map_err(|e| invalid(e.to_string()))?;
    let omega = params.omega0() + r.drive_offset_gamma * params.gamma();
    let drive = DriveTone::new(amp, omega, 0.0)?;
    let defaults = RingdownOptions::default();
    let opts = RingdownOptions {
        oversample: config.integration.oversample.unwrap_or(defaults.oversample),
        lp_bandwidth: r.lp_bandwidth_rad_s,
        sweep: SweepOptions {
            dwell_decay_times: config.integration.dwell_decay_times,
            measure_cycles: config.integration.measure_cycles,
            oversample: config.integration.oversample.unwrap_or(DEFAULT_OVERSAMPLE),
            initial_settle_cycles: config.integration.settle_cycles,
        },
        ..defaults
    };
    let tau = params.envelope_decay_time();
    let res = ringdown_experiment_with(
        params,
        &drive,
        r.drive_decay_times * tau,
        r.free_decay_times * tau,
        r.prep_sweep,
        &opts,
    )?;
    derived.insert("level".into(), toml::Value::Table(level_table(params, amp)?));
    derived.insert("drive_omega_rad_s".into(), omega.into());
    derived.insert("fitted_decay_time_s".into(), res.fitted_decay_time.into());
    if let Some(rate) = res.fitted_freq_decay_rate {
        derived.insert("fitted_freq_decay_rate_per_s".into(), rate.into());
    }
    derived.insert("epsilon0".into(), res.epsilon0.into());
    derived.insert("filter_transient_s".into(), res.transient_time.into());
    derived.insert("lp_bandwidth_rad_s".into(), res.free.lp_bandwidth.into());
    let ds = config.output.downsample;
    Ok(vec![
        demod_table("ringdown_forced.csv", &res.forced, ds),
        demod_table("ringdown_free.csv", &res.free, ds),
    ])
}

fn run_pumpprobe(config: &ExperimentConfig, params: &OscillatorParams, derived: &mut toml::Table) -> Result<Vec<Table>> {
    let pp = config.pumpprobe.as_ref().expect("validated");
    let g = params.gamma();
    let eps = pp.pump_epsilon;
    let wp = params.omega0() * (1.0 + eps) + pp.pump_offset_gamma * g;
    let pump_amp = pump_amp_for_epsilon(params, eps, wp)?;
    let probe_amp = pp.probe_ratio * pump_amp;
    let pair = conjugate_resonances(params, eps, wp)?;
    derived.insert("pump_omega_rad_s".into(), wp.into());
    derived.insert("pump_amp_m_s2".into(), pump_amp.into());
    derived.insert("probe_amp_m_s2".into(), probe_amp.into());
    derived.insert("omega_plus_rad_s".into(), pair.omega_plus.into());
    derived.insert("omega_minus_rad_s".into(), pair.omega_minus.into());
    if let Some(c) = coupled_resonances(params, eps, wp) {
        derived.insert("conjugate_peak_plus_rad_s".into(), c.omega_plus.into());
        derived.insert("conjugate_peak_minus_rad_s".into(), c.omega_minus.into());
    }

    let grid = linear_grid(wp + pp.offset_start_gamma * g, wp + pp.offset_stop_gamma * g, pp.points)?;
    let mut scan = Table::new("pumpprobe.csv", &["omega_s_rad_s", "freq_s_hz", "mag_probe_m", "mag_conj_m"]);
    for &ws in &grid {
        let r = linearized_probe_response(params, eps, wp, probe_amp, ws)?;
        scan.push(vec![ws.into(), hz(ws).into(), r.at_probe.norm().into(), r.at_conjugate.norm().into()]);
    }
    let mut tables = vec![scan];

    if !pp.time_domain_offsets_gamma.is_empty() {
        let pump = DriveTone::new(pump_amp, wp, 0.0)?;
        let hint = match config.output.seed_branch {
            Some(SeedBranch::Lower) => Some(0.0),
            _ => None,
        };
        let opts = MixingOptions {
            oversample: oversample(config),
            pump_amplitude_hint: hint,
            ..MixingOptions::default()
        };
        let rows = pp
            .time_domain_offsets_gamma
            .par_iter()
            .map(|&k| {
                let ws = wp + k * g;
                let probe = DriveTone::new(probe_amp, ws, 0.0)?;
                let m = timedomain_mixing_check_with(params, &pump, &probe, 0.0, &opts)?;
                let lin = linearized_probe_response(params, m.pump_epsilon, wp, probe_amp, ws)?;
                Ok(vec![
                    ws.into(),
                    hz(ws).into(),
                    m.probe.norm().into(),
                    m.conjugate.norm().into(),
                    lin.at_probe.norm().into(),
                    lin.at_conjugate.norm().into(),
                    m.pump_epsilon.into(),
                    Cell::Int(i64::from(m.overlapping)),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(
            "pumpprobe_timedomain.csv",
            &[
                "omega_s_rad_s",
                "freq_s_hz",
                "measured_probe_m",
                "measured_conj_m",
                "linearized_probe_m",
                "linearized_conj_m",
                "pump_epsilon",
                "overlapping",
            ],
        );
        rows.into_iter().for_each(|r| t.push(r));
        tables.push(t);
    }
    Ok(tables)
}

fn scan_table(name: &str, points: &[ScanPoint], params: &crate::intermodal::TwoModeParams) -> Table {
    let mut t = Table::new(
        name,
        &[
            "omega_p_rad_s",
            "freq_p_hz",
            "mode1_amplitude_m",
            "mode2_resonance_rad_s",
            "mode2_freq_hz",
            "shift_linewidths",
        ],
    );
    for p in points {
        t.push(vec![
            p.omega_p.into(),
            hz(p.omega_p).into(),
            p.mode1_amplitude.into(),
            p.mode2_resonance.into(),
            hz(p.mode2_resonance).into(),
            p.shift_linewidths(params).into(),
        ]);
    }
    t
}

fn run_intermodal(config: &ExperimentConfig, derived: &mut toml::Table) -> Result<Vec<Table>> {
    let im = config.intermodal.as_ref().expect("validated");
    let tm = config.two_mode_params().map_err(|e| invalid(e.to_string()))?;
    let amp = drive_amp(tm.mode1(), "intermodal", im.amp, im.peak_epsilon).map_err(|e| invalid(e.to_string()))?;
    let grid = linear_grid(TAU * im.f_start_hz, TAU * im.f_stop_hz, im.points)?;
    let up = intermodal_scan(&tm, amp, &grid, SweepDirection::Up)?;
    let down = intermodal_scan(&tm, amp, &grid, SweepDirection::Down)?;
    derived.insert("level".into(), toml::Value::Table(level_table(tm.mode1(), amp)?));
    derived.insert("beta12_m2".into(), tm.beta12().into());
    derived.insert("mode2_omega0_rad_s".into(), tm.mode2().omega0().into());
    derived.insert("mode2_linewidth_rad_s".into(), tm.mode2_linewidth().into());
    let max_shift = up.iter().chain(&down).map(|p| p.shift_linewidths(&tm)).fold(0.0, f64::max);
    derived.insert("max_shift_linewidths".into(), max_shift.into());
    Ok(vec![
        scan_table("intermodal_up.csv", &up, &tm),
        scan_table("intermodal_down.csv", &down, &tm),
    ])
}
