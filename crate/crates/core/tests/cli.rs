//! Command-line behaviour: artifacts, exit codes and error reporting.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdc-calib"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn text(out: &Path, name: &str) -> String {
    fs::read_to_string(out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_writes_event_trace_and_pulse_height_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "[source]\nmode = \"spontaneous\"\npair_rate = 1e6\nduration = 5e-4\n").unwrap();
    let o = run(&["simulate", "--config", config.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["events.csv", "trace1.csv", "trace2.csv", "pulse_heights1.csv", "pulse_heights2.csv", "summary.txt"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let events = text(dir.path(), "events.csv");
    let mut lines = events.lines();
    assert_eq!(lines.next(), Some("beam,time_s,link_id"));
    let (mut n1, mut n2) = (0, 0);
    for line in lines {
        match line.split(',').next() {
            Some("1") => n1 += 1,
            Some("2") => n2 += 1,
            other => panic!("unexpected beam {other:?}"),
        }
    }
    assert!(n1 > 300);
    assert_eq!(n1, n2, "lossless pair source puts one photon in each beam");
    assert!(text(dir.path(), "trace1.csv").starts_with("time_s,current\n"));
}

#[test]
fn no_stimulation_gives_an_empty_beam_one_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--set", "source.stim_prob=0", "--set", "source.duration=2e-4"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(text(dir.path(), "trace1.csv"), "time_s,current\n");
    assert!(text(dir.path(), "trace2.csv").lines().count() > 1);
}

#[test]
fn calibrate_reports_both_estimators_and_the_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["calibrate", "--set", "source.mode=spontaneous", "--set", "source.pair_rate=1e7", "--set", "source.duration=1e-3"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = text(dir.path(), "summary.txt");
    assert!(summary.contains("[time_domain]"));
    assert!(summary.contains("[spectral]"));
    assert!(summary.contains("mode spontaneous (prefactor 1)"), "{summary}");
    let eta = text(dir.path(), "eta.csv");
    assert!(eta.starts_with("method,mode,eta2,stat_uncertainty,prefactor,gain_ratio,excess_noise,ratio,flagged\n"));
    assert_eq!(eta.lines().count(), 3);
    for name in ["corr_auto.csv", "corr_cross.csv", "spec_auto.csv", "spec_cross.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert!(text(dir.path(), "corr_auto.csv").starts_with("lag_s,value,stderr\n"));
    assert!(text(dir.path(), "spec_cross.csv").starts_with("freq_hz,value,stderr\n"));
}

fn eta_rows(out: &Path) -> Vec<(f64, f64)> {
    text(out, "eta.csv")
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn ideal_detector_is_consistent_with_unity_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["calibrate", "--set", "detector2.eta=1", "--set", "source.duration=2e-3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (eta, sigma) in eta_rows(dir.path()) {
        assert!((eta - 1.0).abs() < 3.0 * sigma, "{eta} ± {sigma}");
    }
}

#[test]
fn budget_needs_thirty_trials() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["budget", "--set", "budget.trials=29", "--set", "source.duration=2e-4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("input error") && err.contains("30"), "{err}");
    assert!(!dir.path().join("budget.csv").exists());
}

#[test]
fn budget_with_nonlinearity_names_it_dominant() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "budget",
            "--set",
            "source.duration=3e-4",
            "--set",
            "sampling.dt=3e-10",
            "--set",
            "detector1.nonlinearity_eps=0.01",
            "--set",
            "detector2.nonlinearity_eps=0.01",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(text(dir.path(), "summary.txt").contains("dominant systematic nonlinearity"));
    let csv = text(dir.path(), "budget.csv");
    assert!(csv.starts_with("quantity,value\n"));
    assert!(csv.contains("systematic:nonlinearity,"));
    assert!(csv.contains("systematic:residual_systematic,1e-3"));
}

#[test]
fn invalid_configuration_is_reported_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["simulate", "--set", "detector1.eta=1.5"],
        &["simulate", "--set", "sampling.dt=1e-9"],
        &["simulate", "--set", "source.bogus=1"],
        &["simulate", "--set", "no_section"],
        &["calibrate", "--set", "source.mode=coherent", "--set", "source.duration=2e-4"],
    ];
    for args in cases {
        let o = run(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "), "{args:?}");
    }
    let o = run(&["simulate", "--config", "/nonexistent/run.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn band_above_the_plateau_is_an_estimation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--set", "analysis.band_hi=4e8", "--set", "source.duration=5e-4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("plateau"), "{err}");
}

#[test]
fn seed_flag_changes_the_run_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let args = |seed: &'static str| ["simulate", "--seed", seed, "--set", "source.duration=2e-4"];
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(run(&args("5"), &a).status.success());
    assert!(run(&args("5"), &b).status.success());
    assert!(run(&args("6"), &c).status.success());
    assert_eq!(fs::read(a.join("events.csv")).unwrap(), fs::read(b.join("events.csv")).unwrap());
    assert_ne!(fs::read(a.join("events.csv")).unwrap(), fs::read(c.join("events.csv")).unwrap());
}
