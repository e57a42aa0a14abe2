//! Experiment configuration files.
//!
//! A configuration is a TOML document with an `[oscillator]` table, optional
//! `[integration]` and `[output]` tables, and one table named after the
//! experiment `kind`. Unknown keys are rejected. A metadata sidecar written
//! by a previous run is accepted too: its `[config]` table is used.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::intermodal::TwoModeParams;
use crate::model::{OscillatorParams, MIN_OVERSAMPLE};
use crate::steady_state::drive_for_peak_epsilon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Steady,
    Sweep,
    Ringdown,
    Pumpprobe,
    Intermodal,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Steady => "steady",
            Kind::Sweep => "sweep",
            Kind::Ringdown => "ringdown",
            Kind::Pumpprobe => "pumpprobe",
            Kind::Intermodal => "intermodal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedBranch {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub oscillator: OscillatorConfig,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ringdown: Option<RingdownConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pumpprobe: Option<PumpProbeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermodal: Option<IntermodalConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorConfig {
    pub frequency_hz: f64,
    pub q: f64,
    #[serde(default)]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    /// Steps per natural period; each experiment has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oversample: Option<usize>,
    #[serde(default = "default_dwell")]
    pub dwell_decay_times: f64,
    #[serde(default = "default_measure_cycles")]
    pub measure_cycles: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settle_cycles: Option<usize>,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            oversample: None,
            dwell_decay_times: default_dwell(),
            measure_cycles: default_measure_cycles(),
            settle_cycles: None,
        }
    }
}

fn default_dwell() -> f64 {
    5.0
}

fn default_measure_cycles() -> usize {
    100
}

fn default_downsample() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory used when `--out` is not given. Not recorded in the
    /// sidecar, so a re-run may write elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Keep every n-th sample of carrier-rate series.
    #[serde(default = "default_downsample")]
    pub downsample: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_branch: Option<SeedBranch>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            downsample: 1,
            seed_branch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_epsilon: Option<f64>,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub points: usize,
    #[serde(default)]
    pub time_domain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_epsilon: Option<Vec<f64>>,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    /// Grid step in linewidths; exclusive with `points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default = "both_directions")]
    pub directions: Vec<Direction>,
}

fn both_directions() -> Vec<Direction> {
    vec![Direction::Up, Direction::Down]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingdownConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_epsilon: Option<f64>,
    /// Drive frequency offset from `omega0`, in linewidths.
    #[serde(default)]
    pub drive_offset_gamma: f64,
    #[serde(default = "default_drive_decay_times")]
    pub drive_decay_times: f64,
    #[serde(default = "default_free_decay_times")]
    pub free_decay_times: f64,
    #[serde(default)]
    pub prep_sweep: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_bandwidth_rad_s: Option<f64>,
}

fn default_drive_decay_times() -> f64 {
    12.0
}

fn default_free_decay_times() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpProbeConfig {
    pub pump_epsilon: f64,
    /// Pump offset from `omega0 (1 + pump_epsilon)`, in linewidths.
    #[serde(default)]
    pub pump_offset_gamma: f64,
    #[serde(default = "default_probe_ratio")]
    pub probe_ratio: f64,
    /// Probe scan relative to the pump, in linewidths.
    pub offset_start_gamma: f64,
    pub offset_stop_gamma: f64,
    pub points: usize,
    /// Probe offsets, in linewidths, checked by full integration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub time_domain_offsets_gamma: Vec<f64>,
}

fn default_probe_ratio() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntermodalConfig {
    pub mode2_frequency_hz: f64,
    pub mode2_q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_epsilon: Option<f64>,
    /// Fixed coupling, m^-2; exclusive with `shift_linewidths`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta12: Option<f64>,
    /// Calibrate the coupling to this maximum mode-2 shift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_linewidths: Option<f64>,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub points: usize,
}

/// A configuration problem, located where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key path, empty for syntax errors.
    pub field: String,
    /// 1-based line in the source text.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.field.is_empty()) {
            (Some(l), false) => write!(f, "line {l}: {}: {}", self.field, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "{}: {}", self.field, self.message),
            (None, true) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    #[allow(dead_code)]
    tool: toml::Table,
    #[allow(dead_code)]
    derived: toml::Table,
    #[allow(dead_code)]
    #[serde(default)]
    files: Vec<String>,
    config: ExperimentConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (or at top level for an empty section).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            current = name.strip_prefix("config.").unwrap_or(name).to_string();
            if current == "config" {
                current.clear();
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    /// Parses and validates a configuration or a metadata sidecar.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| de_error(text, e))?;
        let cfg = if table.contains_key("config") && table.contains_key("tool") {
            toml::from_str::<Sidecar>(text).map_err(|e| de_error(text, e))?.config
        } else {
            toml::from_str::<ExperimentConfig>(text).map_err(|e| de_error(text, e))?
        };
        cfg.validate().map_err(|mut e| {
            let (section, key) = match e.field.rsplit_once('.') {
                Some((s, k)) => (s.to_string(), k.to_string()),
                None => (String::new(), e.field.clone()),
            };
            e.line = locate(text, &section, &key).or_else(|| locate(text, "", &section));
            e
        })?;
        Ok(cfg)
    }

    /// Canonical TOML text of this configuration.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn oscillator_params(&self) -> Result<OscillatorParams, ConfigError> {
        let o = &self.oscillator;
        positive("oscillator.frequency_hz", o.frequency_hz)?;
        if !(o.q > 1.0) || !o.q.is_finite() {
            return Err(field_error("oscillator.q", format!("must be a finite number > 1, got {}", o.q)));
        }
        if !(o.beta >= 0.0) || !o.beta.is_finite() {
            return Err(field_error("oscillator.beta", format!("must be finite and >= 0, got {}", o.beta)));
        }
        OscillatorParams::from_frequency_q(o.frequency_hz, o.q, o.beta)
            .map_err(|e| field_error("oscillator", e.to_string()))
    }

    pub fn two_mode_params(&self) -> Result<TwoModeParams, ConfigError> {
        let p = self.oscillator_params()?;
        let im = self.intermodal.as_ref().ok_or_else(|| missing("intermodal"))?;
        positive("intermodal.mode2_frequency_hz", im.mode2_frequency_hz)?;
        if !(im.mode2_q > 1.0) || !im.mode2_q.is_finite() {
            return Err(field_error("intermodal.mode2_q", format!("must be a finite number > 1, got {}", im.mode2_q)));
        }
        let m2 = OscillatorParams::from_frequency_q(im.mode2_frequency_hz, im.mode2_q, 0.0)
            .map_err(|e| field_error("intermodal", e.to_string()))?;
        let amp = drive_amp(&p, "intermodal", im.amp, im.peak_epsilon)?;
        let b12 = match (im.beta12, im.shift_linewidths) {
            (Some(b), None) => {
                if !(b >= 0.0) || !b.is_finite() {
                    return Err(field_error("intermodal.beta12", "must be finite and >= 0"));
                }
                b
            }
            (None, Some(s)) => {
                if !(s >= 0.0) || !s.is_finite() {
                    return Err(field_error("intermodal.shift_linewidths", "must be finite and >= 0"));
                }
                crate::intermodal::calibrate_beta12(&p, &m2, amp, s)
                    .map_err(|e| field_error("intermodal.shift_linewidths", e.to_string()))?
            }
            _ => {
                return Err(field_error(
                    "intermodal",
                    "exactly one of beta12 or shift_linewidths is required",
                ))
            }
        };
        TwoModeParams::new(p, m2, b12).map_err(|e| field_error("intermodal.beta12", e.to_string()))
    }

    /// Checks every value the selected experiment will use.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.oscillator_params()?;
        let it = &self.integration;
        if let Some(n) = it.oversample {
            if n < MIN_OVERSAMPLE {
                return Err(field_error(
                    "integration.oversample",
                    format!("must be >= {MIN_OVERSAMPLE}, got {n}"),
                ));
            }
        }
        positive("integration.dwell_decay_times", it.dwell_decay_times)?;
        if it.measure_cycles < crate::time_domain::SETTLE_CHECK_CYCLES {
            return Err(field_error(
                "integration.measure_cycles",
                format!("must be >= {}", crate::time_domain::SETTLE_CHECK_CYCLES),
            ));
        }
        if self.output.downsample == 0 {
            return Err(field_error("output.downsample", "must be >= 1"));
        }
        let present = [
            (Kind::Steady, self.steady.is_some()),
            (Kind::Sweep, self.sweep.is_some()),
            (Kind::Ringdown, self.ringdown.is_some()),
            (Kind::Pumpprobe, self.pumpprobe.is_some()),
            (Kind::Intermodal, self.intermodal.is_some()),
        ];
        for (k, has) in present {
            if has && k != self.kind {
                return Err(field_error(
                    k.as_str(),
                    format!("table does not belong to a {} experiment", self.kind.as_str()),
                ));
            }
        }
        match self.kind {
            Kind::Steady => {
                let s = self.steady.as_ref().ok_or_else(|| missing("steady"))?;
                drive_amp(&p, "steady", s.amp, s.peak_epsilon)?;
                range("steady", s.f_start_hz, s.f_stop_hz)?;
                if s.points < 2 {
                    return Err(field_error("steady.points", "must be >= 2"));
                }
            }
            Kind::Sweep => {
                let s = self.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
                sweep_levels(&p, s)?;
                range("sweep", s.f_start_hz, s.f_stop_hz)?;
                match (s.step_gamma, s.points) {
                    (Some(step), None) => positive("sweep.step_gamma", step)?,
                    (None, Some(n)) if n >= 2 => {}
                    (None, Some(_)) => return Err(field_error("sweep.points", "must be >= 2")),
                    _ => return Err(field_error("sweep", "exactly one of step_gamma or points is required")),
                }
                if s.directions.is_empty() {
                    return Err(field_error("sweep.directions", "must list at least one direction"));
                }
            }
            Kind::Ringdown => {
                let r = self.ringdown.as_ref().ok_or_else(|| missing("ringdown"))?;
                drive_amp(&p, "ringdown", r.amp, r.peak_epsilon)?;
                finite("ringdown.drive_offset_gamma", r.drive_offset_gamma)?;
                positive("ringdown.drive_decay_times", r.drive_decay_times)?;
                positive("ringdown.free_decay_times", r.free_decay_times)?;
                if let Some(bw) = r.lp_bandwidth_rad_s {
                    positive("ringdown.lp_bandwidth_rad_s", bw)?;
                }
                if r.drive_offset_gamma * p.gamma() <= -p.omega0() {
                    return Err(field_error("ringdown.drive_offset_gamma", "drive frequency must be positive"));
                }
            }
            Kind::Pumpprobe => {
                let pp = self.pumpprobe.as_ref().ok_or_else(|| missing("pumpprobe"))?;
                positive("pumpprobe.pump_epsilon", pp.pump_epsilon)?;
                if p.beta() <= 0.0 {
                    return Err(field_error("oscillator.beta", "a pump-probe experiment needs beta > 0"));
                }
                finite("pumpprobe.pump_offset_gamma", pp.pump_offset_gamma)?;
                positive("pumpprobe.probe_ratio", pp.probe_ratio)?;
                if pp.probe_ratio > crate::pump_probe::MAX_PROBE_RATIO {
                    return Err(field_error(
                        "pumpprobe.probe_ratio",
                        format!("must be <= {}", crate::pump_probe::MAX_PROBE_RATIO),
                    ));
                }
                finite("pumpprobe.offset_start_gamma", pp.offset_start_gamma)?;
                finite("pumpprobe.offset_stop_gamma", pp.offset_stop_gamma)?;
                if pp.offset_start_gamma == pp.offset_stop_gamma {
                    return Err(field_error("pumpprobe.offset_stop_gamma", "must differ from offset_start_gamma"));
                }
                if pp.points < 2 {
                    return Err(field_error("pumpprobe.points", "must be >= 2"));
                }
                for &o in &pp.time_domain_offsets_gamma {
                    finite("pumpprobe.time_domain_offsets_gamma", o)?;
                    if o == 0.0 {
                        return Err(field_error(
                            "pumpprobe.time_domain_offsets_gamma",
                            "a probe at the pump frequency cannot be separated",
                        ));
                    }
                }
            }
            Kind::Intermodal => {
                let im = self.intermodal.as_ref().ok_or_else(|| missing("intermodal"))?;
                self.two_mode_params()?;
                range("intermodal", im.f_start_hz, im.f_stop_hz)?;
                if im.points < 2 {
                    return Err(field_error("intermodal.points", "must be >= 2"));
                }
            }
        }
        Ok(())
    }
}

/// Drive amplitudes of the sweep levels, in m/s^2.
pub fn sweep_levels(p: &OscillatorParams, s: &SweepConfig) -> Result<Vec<f64>, ConfigError> {
    let levels = match (&s.amp, &s.peak_epsilon) {
        (Some(a), None) => {
            for &v in a {
                positive("sweep.amp", v)?;
            }
            a.clone()
        }
        (None, Some(e)) => e
            .iter()
            .map(|&v| {
                positive("sweep.peak_epsilon", v)?;
                epsilon_drive(p, "sweep.peak_epsilon", v)
            })
            .collect::<Result<_, _>>()?,
        _ => return Err(field_error("sweep", "exactly one of amp or peak_epsilon is required")),
    };
    if levels.is_empty() {
        return Err(field_error("sweep", "at least one drive level is required"));
    }
    Ok(levels)
}

/// Drive amplitude from either `amp` or `peak_epsilon`.
pub fn drive_amp(p: &OscillatorParams, section: &str, amp: Option<f64>, eps: Option<f64>) -> Result<f64, ConfigError> {
    match (amp, eps) {
        (Some(a), None) => {
            positive(&format!("{section}.amp"), a)?;
            Ok(a)
        }
        (None, Some(e)) => {
            let key = format!("{section}.peak_epsilon");
            positive(&key, e)?;
            epsilon_drive(p, &key, e)
        }
        _ => Err(field_error(section, "exactly one of amp or peak_epsilon is required")),
    }
}

fn epsilon_drive(p: &OscillatorParams, key: &str, eps: f64) -> Result<f64, ConfigError> {
    if p.beta() <= 0.0 {
        return Err(field_error(key, "needs oscillator.beta > 0; use amp for a linear mode"));
    }
    drive_for_peak_epsilon(p, eps).map_err(|e| field_error(key, e.to_string()))
}

fn field_error(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        line: None,
        message: message.into(),
    }
}

fn missing(section: &str) -> ConfigError {
    field_error(section, "table is required for this experiment kind")
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_error(field, format!("must be a finite number > 0, got {v}")))
    }
}

fn range(section: &str, start: f64, stop: f64) -> Result<(), ConfigError> {
    positive(&format!("{section}.f_start_hz"), start)?;
    positive(&format!("{section}.f_stop_hz"), stop)?;
    if start >= stop {
        return Err(field_error(&format!("{section}.f_stop_hz"), "must exceed f_start_hz"));
    }
    Ok(())
}

fn de_error(text: &str, e: toml::de::Error) -> ConfigError {
    let line = e.span().map(|s: Range<usize>| line_of(text, s.start));
    let message = e.message().trim().to_string();
    let field = unknown_field(&message).unwrap_or_default();
    ConfigError { field, line, message }
}

fn unknown_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest.split('`').next()?.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"kind = "sweep"

[oscillator]
frequency_hz = 1.057e6
q = 5000
beta = 1e13

[sweep]
peak_epsilon = [1e-4, 1e-3]
f_start_hz = 1.0565e6
f_stop_hz = 1.0585e6
points = 21
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::from_toml_str(SWEEP).unwrap();
        assert_eq!(c.kind, Kind::Sweep);
        assert_eq!(c.integration.oversample, None);
        assert_eq!(c.sweep.as_ref().unwrap().directions, both_directions());
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_key_reports_line_and_field() {
        let bad = SWEEP.replace("q = 5000", "q = 5000\nqq = 3");
        let e = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(e.line, Some(6));
        assert_eq!(e.field, "qq");
    }

    #[test]
    fn negative_q_is_located() {
        let bad = SWEEP.replace("q = 5000", "q = -5");
        let e = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(e.field, "oscillator.q");
        assert_eq!(e.line, Some(5));
        assert!(e.to_string().starts_with("line 5: oscillator.q"));
    }

    #[test]
    fn syntax_error_has_a_line() {
        let e = ExperimentConfig::from_toml_str("kind = \"sweep\"\n[oscillator\n").unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn wrong_table_for_kind() {
        let bad = SWEEP.replace("kind = \"sweep\"", "kind = \"steady\"");
        let e = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(e.field, "sweep");
    }

    #[test]
    fn exclusive_drive_keys() {
        let bad = SWEEP.replace("points = 21", "points = 21\namp = [1.0]");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SWEEP.replace("points = 21", "step_gamma = 0.2\npoints = 21");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn sidecar_config_table_is_accepted() {
        let c = ExperimentConfig::from_toml_str(SWEEP).unwrap();
        let mut doc = String::from("files = [\"a.csv\"]\n\n[tool]\nname = \"nlmech\"\n\n[derived]\nq = 5000.0\n\n");
        let mut table = toml::Table::new();
        table.insert("config".into(), toml::Value::try_from(&c).unwrap());
        doc.push_str(&toml::to_string(&table).unwrap());
        assert_eq!(ExperimentConfig::from_toml_str(&doc).unwrap(), c);
    }
}
