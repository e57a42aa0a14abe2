use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nlmech::config::ExperimentConfig;

fn nlmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlmech")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const RINGDOWN: &str = r#"kind = "ringdown"

[oscillator]
frequency_hz = 1.0e6
q = 1000

[ringdown]
amp = 1.0
drive_offset_gamma = 2.0
drive_decay_times = 10
free_decay_times = 6

[output]
downsample = 10
"#;

const SWEEP: &str = r#"kind = "sweep"

[oscillator]
frequency_hz = 1.0e6
q = 1000
beta = 1e13

[sweep]
peak_epsilon = [1e-3, 1e-2]
f_start_hz = 0.9990e6
f_stop_hz = 1.0080e6
step_gamma = 0.5
"#;

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn negative_q_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &RINGDOWN.replace("q = 1000", "q = -1000"));
    let out = tmp.path().join("out");
    let o = nlmech(&["ringdown", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5") && err.contains("oscillator.q"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &RINGDOWN.replace("amp = 1.0", "amp = 1.0\nampp = 2.0"));
    let o = nlmech(&["ringdown", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ampp") && err.contains("line 9"), "{err}");
}

#[test]
fn subcommand_must_match_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", RINGDOWN);
    let o = nlmech(&["sweep", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = nlmech(&["ringdown", "--config", &cfg, "--seed-branch", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nlmech(&["ringdown", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "wild.toml",
        r#"kind = "steady"

[oscillator]
frequency_hz = 1.0e6
q = 100
beta = 1e13

[integration]
oversample = 20

[steady]
amp = 1e13
f_start_hz = 1.0e6
f_stop_hz = 1.1e6
points = 2
time_domain = true
"#,
    );
    let o = nlmech(&["steady", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn ringdown_columns_and_sidecar_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "rd.toml", RINGDOWN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = nlmech(&["ringdown", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    for name in ["ringdown_forced.csv", "ringdown_free.csv"] {
        let (header, rows) = read_csv(&a.join(name));
        assert_eq!(header, ["t_s", "x1_m", "x2_m", "envelope_m", "inst_freq_rad_s"]);
        assert!(rows.len() > 100);
    }
    let (_, forced) = read_csv(&a.join("ringdown_forced.csv"));
    let (_, free) = read_csv(&a.join("ringdown_free.csv"));
    assert_eq!(forced.last().unwrap()[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(free[0][0].parse::<f64>().unwrap(), 0.0);

    let meta = fs::read_to_string(a.join("ringdown.meta.toml")).unwrap();
    let doc: toml::Table = toml::from_str(&meta).unwrap();
    let derived = doc["derived"].as_table().unwrap();
    let tau = derived["envelope_decay_time_s"].as_float().unwrap();
    let fit = derived["fitted_decay_time_s"].as_float().unwrap();
    assert!((fit / tau - 1.0).abs() < 0.02);
    assert_eq!(doc["tool"]["version"].as_str(), Some(env!("CARGO_PKG_VERSION")));

    let sidecar = a.join("ringdown.meta.toml");
    let o = nlmech(&["ringdown", "--config", sidecar.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["ringdown_forced.csv", "ringdown_free.csv", "ringdown.meta.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn cli_flags_override_and_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "rd.toml", RINGDOWN);
    let a = tmp.path().join("a");
    let o = nlmech(&["ringdown", "--config", &cfg, "--out", a.to_str().unwrap(), "--downsample", "1000"]);
    assert!(o.status.success());
    let meta = fs::read_to_string(a.join("ringdown.meta.toml")).unwrap();
    let c = ExperimentConfig::from_toml_str(&meta).unwrap();
    assert_eq!(c.output.downsample, 1000);
    let (_, rows) = read_csv(&a.join("ringdown_free.csv"));
    assert!(rows.len() < 200);
}

#[test]
fn sweep_writes_curves_with_analytic_overlay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sw.toml", SWEEP);
    let a = tmp.path().join("a");
    let o = nlmech(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for level in 1..=2 {
        for dir in ["up", "down"] {
            let (header, rows) = read_csv(&a.join(format!("sweep_level{level}_{dir}.csv")));
            assert_eq!(
                header,
                ["omega_rad_s", "freq_hz", "amplitude_m", "phase_rad", "analytic_up_m", "analytic_down_m"]
            );
            let omegas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
            let ascending = omegas.windows(2).all(|w| w[1] > w[0]);
            assert_eq!(ascending, dir == "up");
            // Far below resonance the single branch is reached in both directions.
            let row = rows.iter().find(|r| r[0].parse::<f64>().unwrap() == omegas.iter().cloned().fold(f64::MAX, f64::min)).unwrap();
            let (m, u): (f64, f64) = (row[2].parse().unwrap(), row[4].parse().unwrap());
            assert!((m / u - 1.0).abs() < 0.02, "{m} {u}");
        }
    }
    let meta = fs::read_to_string(a.join("sweep.meta.toml")).unwrap();
    let doc: toml::Table = toml::from_str(&meta).unwrap();
    let levels = doc["derived"]["levels"].as_array().unwrap();
    assert!(levels[1].get("saddle_upper_rad_s").is_some());
    assert!(levels[0].get("saddle_upper_rad_s").is_none());
}

#[test]
fn pumpprobe_scan_columns_and_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "pp.toml",
        r#"kind = "pumpprobe"

[oscillator]
frequency_hz = 782e3
q = 1000
beta = 1e13

[pumpprobe]
pump_epsilon = 1e-3
pump_offset_gamma = -3.0
offset_start_gamma = -6.0
offset_stop_gamma = 6.0
points = 121
"#,
    );
    let a = tmp.path().join("a");
    let o = nlmech(&["pumpprobe", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&a.join("pumpprobe.csv"));
    assert_eq!(header, ["omega_s_rad_s", "freq_s_hz", "mag_probe_m", "mag_conj_m"]);
    assert_eq!(rows.len(), 121);
    let doc: toml::Table = toml::from_str(&fs::read_to_string(a.join("pumpprobe.meta.toml")).unwrap()).unwrap();
    let d = doc["derived"].as_table().unwrap();
    let (p, m, wp) = (
        d["omega_plus_rad_s"].as_float().unwrap(),
        d["omega_minus_rad_s"].as_float().unwrap(),
        d["pump_omega_rad_s"].as_float().unwrap(),
    );
    assert!((p + m - 2.0 * wp).abs() < 1e-6);
}

#[test]
fn intermodal_writes_both_scans() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "im.toml",
        r#"kind = "intermodal"

[oscillator]
frequency_hz = 1.057e6
q = 5000
beta = 1e13

[intermodal]
mode2_frequency_hz = 1.6e6
mode2_q = 6000
peak_epsilon = 3e-3
shift_linewidths = 170
f_start_hz = 1.05680e6
f_stop_hz = 1.05880e6
points = 101
"#,
    );
    let a = tmp.path().join("a");
    let o = nlmech(&["intermodal", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: toml::Table = toml::from_str(&fs::read_to_string(a.join("intermodal.meta.toml")).unwrap()).unwrap();
    let max = doc["derived"]["max_shift_linewidths"].as_float().unwrap();
    assert!(max > 100.0 && max <= 170.0 + 1e-9, "{max}");
    let (h, up) = read_csv(&a.join("intermodal_up.csv"));
    let (_, down) = read_csv(&a.join("intermodal_down.csv"));
    assert_eq!(h.last().unwrap(), "shift_linewidths");
    assert_eq!(up.len(), down.len());
}
