use std::process::Command;

fn qsd(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qsd")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> String {
    let path = dir.path().join("run.conf");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn epoch_prints_one_row() {
    let (code, out, _) = qsd(&["epoch", "--d", "5"]);
    assert_eq!(code, 0);
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("d,y,p,z,b"));
}

#[test]
fn invalid_params_exit_one() {
    let (code, _, err) = qsd(&["epoch", "--d", "5", "--zeta", "0.1"]);
    assert_eq!(code, 1);
    assert!(err.contains("error"));
}

#[test]
fn simulate_writes_trajectory() {
    let (code, out, err) = qsd(&["simulate", "--mode", "long-sp", "--horizon", "300"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.lines().count() > 2);
    assert!(err.contains("outcome"));
}

#[test]
fn config_errors_report_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, "regime = short_short\nbogus = 1\n");
    let (code, _, err) = qsd(&["sweep", "--config", &path]);
    assert_eq!(code, 1);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn sweep_needs_config() {
    assert_eq!(qsd(&["sweep"]).0, 1);
}

#[test]
fn sweep_output_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        &dir,
        "axes.nu2.lo = 0\naxes.nu2.hi = 30\naxes.nu2.points = 7\naxes.gamma.lo = 0.1\naxes.gamma.hi = 5\naxes.gamma.points = 5\n",
    );
    let one = qsd(&["sweep", "--config", &path, "--threads", "1"]);
    let four = qsd(&["sweep", "--config", &path, "--threads", "4"]);
    assert_eq!(one.0, 0);
    assert_eq!(one.1, four.1);
    assert_eq!(one.1.lines().count(), 36);
}

#[test]
fn sweep_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, "regime = bargaining\naxes.nu2.lo = 0\naxes.nu2.hi = 10\naxes.nu2.points = 3\n");
    let out = dir.path().join("out.csv");
    let (code, stdout, _) = qsd(&["sweep", "--config", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("nu2,disagreement_outcome"));
}

#[test]
fn bargain_reports_solution() {
    let (code, out, _) = qsd(&["bargain", "--w", "0.3"]);
    assert_eq!(code, 0);
    assert!(out.lines().nth(1).unwrap().split(',').count() == 12);
}

#[test]
fn verify_passes() {
    let (code, out, _) = qsd(&["verify", "--draws", "30"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
