use std::path::Path;
use std::process::{Command, Output};

fn phasefield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasefield")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn list_shows_every_preset() {
    let out = phasefield(&["list"]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().count(), 9);
    for name in phasefield::harness::PRESETS {
        assert!(stdout.lines().any(|l| l.starts_with(name)), "{name} missing from\n{stdout}");
    }
}

#[test]
fn unknown_preset_is_a_configuration_error() {
    let out = phasefield(&["run", "no-such-preset"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("no-such-preset"));
}

#[test]
fn bad_config_reports_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "preset = separation-1d-dw\n# comment\ndt = soon\n").unwrap();
    let out = phasefield(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("line 3") && err.contains("'dt'"), "{err}");
}

#[test]
fn bad_flag_value_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = phasefield(&["run", "separation-1d-dw", "--schedule", "diagonal", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("--schedule"));
}

fn short_run(out: &Path) -> Output {
    phasefield(&[
        "run",
        "separation-1d-log",
        "--cells",
        "40",
        "--t-end",
        "0.05",
        "--strict",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = short_run(dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));

    let series = std::fs::read_to_string(dir.path().join("run_series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some(phasefield::harness::output::SERIES_HEADER));
    // initial state plus five steps
    assert_eq!(lines.count(), 6);

    let initial = std::fs::read_to_string(dir.path().join("run_t0.csv")).unwrap();
    assert_eq!(initial.lines().next(), Some("x,phi"));
    assert_eq!(initial.lines().count(), 41);
    assert!(dir.path().join("run_t0p05.csv").exists());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["variants"][0]["stats"]["steps"], 5);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(short_run(a.path()).status.success());
    assert!(short_run(b.path()).status.success());
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for name in names {
        assert_eq!(
            std::fs::read(a.path().join(&name)).unwrap(),
            std::fs::read(b.path().join(&name)).unwrap(),
            "{name:?}"
        );
    }
}
