use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use printsense::ingest::{write_wav, Quantization};
use printsense::signal::ChannelConfig;

fn printsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_printsense"))
        .args(args)
        .stdin(Stdio::null())
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = printsense(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    printsense(args).status.code().unwrap()
}

fn json_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn tone_wav(path: &Path, hz: f64, amplitude: f64, seconds: f64) {
    let n = (seconds * 5000.0) as usize;
    let xs: Vec<f64> = (0..n)
        .map(|i| amplitude * (2.0 * PI * hz * i as f64 / 5000.0).sin())
        .collect();
    write_wav(path, &ChannelConfig::acoustic(5000.0).unwrap(), &xs, Quantization::Clamp).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_labelled_recording() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("blk");
    ok(&["simulate", "--scenario", "blocked", "--duration", "3", "--out", p(&out)]);
    for f in ["acoustic.wav", "accel.csv", "labels.jsonl", "scenario.conf"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let labels = json_lines(&std::fs::read_to_string(out.join("labels.jsonl")).unwrap());
    assert!(!labels.is_empty());
    assert!(labels.iter().all(|l| l["state"] == "blocked"));
    let csv = std::fs::read_to_string(out.join("accel.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t_us,ax_g,ay_g,az_g"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2000);
}

#[test]
fn simulate_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["simulate", "--scenario", "runout", "--duration", "2", "--seed", "4", "--out", p(&a)]);
    // The written scenario file reproduces the run on its own.
    let conf = a.join("scenario.conf");
    ok(&["simulate", "--spec", p(&conf), "--out", p(&b)]);
    for f in ["acoustic.wav", "accel.csv", "labels.jsonl", "scenario.conf"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let out = printsense(&["simulate", "--scenario", "jammed", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("normal-to-blocked") && err.contains("y-motor"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["features"]), 2);
    assert_eq!(code(&["simulate", "--scenario", "blocked", "--snr", "loud", "--out", "x"]), 2);
    assert_eq!(code(&["monitor"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn features_of_a_sine() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("sine.wav");
    tone_wav(&wav, 400.0, 0.5, 5.0);
    let rows = json_lines(&ok(&["features", "--in", p(&wav)]));
    assert_eq!(rows.len(), 23);
    for r in &rows {
        assert_eq!(r["degenerate"], false);
        assert!((r["rms"].as_f64().unwrap() - 0.5 / 2f64.sqrt()).abs() < 1e-3);
    }
    assert_eq!(rows[1]["t_us"].as_i64().unwrap() - rows[0]["t_us"].as_i64().unwrap(), 204_800);
    assert_eq!(code(&["features", "--in", p(&wav), "--hop", "0"]), 2);

    let quiet = dir.path().join("zero.wav");
    tone_wav(&quiet, 400.0, 0.0, 1.0);
    let rows = json_lines(&ok(&["features", "--in", p(&quiet)]));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["degenerate"] == true && r["cf"] == 0.0));
}

#[test]
fn features_of_accelerometer_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--scenario", "zigzag-print", "--duration", "2", "--out", p(&out)]);
    let rows = json_lines(&ok(&["features", "--in", p(&out.join("accel.csv"))]));
    // 4000 samples, 1024/512 windows, three axes each.
    assert_eq!(rows.len(), 3 * 6);
    assert_eq!(rows[0]["channel"], "accel_x");
    assert_eq!(rows[2]["channel"], "accel_z");
}

#[test]
fn spectrogram_tracks_tone_and_floor() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("tone.wav");
    tone_wav(&wav, 400.0, 0.5, 2.0);
    let csv = ok(&["spectrogram", "--in", p(&wav)]);
    let mut lines = csv.lines();
    let freqs: Vec<f64> = lines.next().unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    for row in lines {
        let db: Vec<f64> = row.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        let k = (0..db.len()).max_by(|&a, &b| db[a].total_cmp(&db[b])).unwrap();
        assert!((freqs[k] - 400.0).abs() <= 2.5, "{}", freqs[k]);
        assert!(db.iter().all(|&v| v <= 0.0));
    }

    let quiet = dir.path().join("zero.wav");
    tone_wav(&quiet, 400.0, 0.0, 1.0);
    let csv = ok(&["spectrogram", "--in", p(&quiet)]);
    for row in csv.lines().skip(1) {
        assert!(row.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == -240.0));
    }

    let pgm = dir.path().join("s.pgm");
    ok(&["spectrogram", "--in", p(&wav), "--out", p(&dir.path().join("s.csv")), "--pgm", p(&pgm)]);
    assert!(std::fs::read(&pgm).unwrap().starts_with(b"P5"));
    assert_eq!(code(&["spectrogram", "--in", p(&wav), "--band", "100,4000"]), 2);
}

#[test]
fn harmonics_of_the_motor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ym");
    ok(&["simulate", "--scenario", "y-motor", "--duration", "3", "--out", p(&out)]);
    let report: serde_json::Value =
        serde_json::from_str(ok(&["harmonics", "--in", p(&out.join("acoustic.wav"))]).trim()).unwrap();
    assert!((report["fundamental_hz"].as_f64().unwrap() - 381.0).abs() < 1.3);
    let orders: Vec<i64> = report["harmonics"].as_array().unwrap().iter().map(|h| h["order"].as_i64().unwrap()).collect();
    assert_eq!(orders, [1, 2, 3]);

    // A lone tone over a -60 dBFS noise floor has no series to corroborate.
    let tone = dir.path().join("tone.wav");
    let mut rng = printsense::rng::Xoshiro256::seed_from_u64(1);
    let xs: Vec<f64> = (0..10_000)
        .map(|i| 0.5 * (2.0 * PI * 400.0 * i as f64 / 5000.0).sin() + 1e-3 * rng.normal())
        .collect();
    write_wav(&tone, &ChannelConfig::acoustic(5000.0).unwrap(), &xs, Quantization::Clamp).unwrap();
    assert_eq!(code(&["harmonics", "--in", p(&tone)]), 5);
    let quiet = dir.path().join("zero.wav");
    tone_wav(&quiet, 400.0, 0.0, 2.0);
    assert_eq!(code(&["harmonics", "--in", p(&quiet)]), 5);
}

#[test]
fn monitor_reports_the_transition() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nb");
    ok(&["simulate", "--scenario", "normal-to-blocked", "--out", p(&out)]);
    let events = json_lines(&ok(&[
        "monitor",
        "--audio",
        p(&out.join("acoustic.wav")),
        "--accel",
        p(&out.join("accel.csv")),
    ]));
    assert_eq!(events.len(), 1, "{events:?}");
    let e = &events[0];
    assert_eq!((e["kind"].as_str(), e["from"].as_str(), e["to"].as_str()), (Some("state_change"), Some("normal"), Some("blocked")));
    let t = e["t_us"].as_i64().unwrap();
    assert!((10_000_000..=10_614_400).contains(&t), "{t}");
}

#[test]
fn monitor_edge_cases() {
    let out = Command::new(env!("CARGO_BIN_EXE_printsense"))
        .args(["monitor", "--audio", "-"])
        .stdin(Stdio::piped())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(code(&["monitor", "--audio", "/definitely/missing.wav"]), 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t_us,ax_g,ay_g,az_g\n0,1,2\n").unwrap();
    assert_eq!(code(&["monitor", "--accel", p(&bad)]), 4);
}

#[test]
fn print_config_layers_file_over_defaults() {
    let defaults = ok(&["monitor", "--print-config"]);
    assert!(defaults.contains("window.acoustic.len = 2048"));
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("m.conf");
    std::fs::write(&conf, "# tighter\nhysteresis_windows = 5\n").unwrap();
    let layered = ok(&["monitor", "--config", p(&conf), "--print-config"]);
    assert!(layered.contains("hysteresis_windows = 5"));
    std::fs::write(&conf, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&["monitor", "--config", p(&conf), "--print-config"]), 2);
}
