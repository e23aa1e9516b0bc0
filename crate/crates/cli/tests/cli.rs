use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn run(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_logperiodic"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: &[u8]) -> String {
    let out = run(args, stdin);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], stdin: &[u8]) -> i32 {
    run(args, stdin).status.code().unwrap()
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn spring_csv_shape() {
    let (header, rows) = parse_csv(&ok(&["spring", "--points", "17", "--t-end", "50"], b""));
    assert_eq!(header, ["t", "x", "v", "m", "k", "omega", "energy"]);
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[0][0], 1.0);
    assert_eq!(rows[16][0], 50.0);
    for row in &rows {
        // Defaults: m0 = t0 = 1, k0 = 4, so θ = 2 and x = sin(2 ln t).
        assert!((row[1] - (2.0 * row[0].ln()).sin()).abs() < 1e-14);
        assert!((row[3] * row[4] - 4.0).abs() < 1e-14);
    }
}

#[test]
fn spring_then_fit_recovers_theta() {
    let csv = ok(&["spring", "--t-end", "1000", "--points", "300"], b"");
    let report: serde_json::Value = serde_json::from_str(&ok(&["fit"], csv.as_bytes())).unwrap();
    assert!((report["theta"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    assert!((report["amp_sin"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(report["envelope"], "constant");

    let velocity = ok(&["fit", "--column", "v", "--envelope", "inverse-time"], csv.as_bytes());
    let report: serde_json::Value = serde_json::from_str(&velocity).unwrap();
    assert!((report["theta"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    assert!((report["amp_cos"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn outputs_are_byte_stable() {
    for args in [
        &["spring", "--points", "200"][..],
        &["simulate", "--points", "200"][..],
        &["check", "all"][..],
    ] {
        assert_eq!(run(args, b"").stdout, run(args, b"").stdout, "{args:?}");
    }
    let csv = ok(&["spring", "--points", "200"], b"");
    assert_eq!(ok(&["fit"], csv.as_bytes()), ok(&["fit"], csv.as_bytes()));
}

#[test]
fn simulation_matches_closed_form() {
    let args = ["--t-end", "100", "--points", "64"];
    let (_, exact) = parse_csv(&ok(&[&["spring"][..], &args].concat(), b""));
    let (header, numeric) = parse_csv(&ok(&[&["simulate", "--tol", "1e-10"][..], &args].concat(), b""));
    assert_eq!(header, ["t", "x", "v"]);
    for (a, b) in exact.iter().zip(&numeric) {
        assert_eq!(a[0], b[0]);
        assert!((a[1] - b[1]).abs() < 1e-8);
        assert!((a[2] - b[2]).abs() < 1e-8);
    }
    let (_, general) = parse_csv(&ok(&[&["simulate", "--kind", "spring-general"][..], &args].concat(), b""));
    for (a, b) in exact.iter().zip(&general) {
        assert!((a[1] - b[1]).abs() < 1e-8);
    }
}

#[test]
fn single_point_grid() {
    let (_, rows) = parse_csv(&ok(&["spring", "--points", "1", "--t-start", "3"], b""));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 3.0);
}

#[test]
fn econ_equilibrium_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "run.json",
        r#"{
  "spec_version": 1,
  "econ": {"gamma": 1, "lambda": 1, "ell0": 2, "ell": 1, "p_star": 100, "d_star": 10,
           "coefficients": {"kind": "log_periodic", "theta": 2}},
  "integrate": {"t_start": 5.5, "t_end": 9.5, "points": 20, "initial": [100, 12]}
}"#,
    );
    let (header, rows) = parse_csv(&ok(&["simulate", "--kind", "econ", "--config", &config], b""));
    assert_eq!(header, ["t", "P", "S"]);
    assert_eq!(rows.len(), 20);
    for row in rows {
        assert!((row[1] - 100.0).abs() < 1e-10);
        assert!((row[2] - 12.0).abs() < 1e-10);
    }
}

#[test]
fn econ_default_start_is_log_periodic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "run.json",
        r#"{"spec_version": 1,
  "econ": {"gamma": 1, "lambda": 1, "ell0": 2, "ell": 1, "p_star": 100, "d_star": 10,
           "coefficients": {"kind": "log_periodic", "theta": 2}},
  "integrate": {"t_end": 9.9, "points": 200}}"#,
    );
    let csv = ok(&["simulate", "--kind", "econ", "--config", &config], b"");
    let report: serde_json::Value = serde_json::from_str(&ok(&["fit", "--column", "P"], csv.as_bytes())).unwrap();
    assert!((report["theta"].as_f64().unwrap() - 2.0).abs() < 1e-3);
    assert_eq!(code(&["simulate", "--kind", "econ"], b""), 2);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "run.json",
        r#"{"spec_version": 1, "spring": {"m0": 1, "t0": 1, "k0": 9, "x0": 1},
            "integrate": {"points": 5, "t_end": 10}}"#,
    );
    let (_, rows) = parse_csv(&ok(&["spring", "--config", &config], b""));
    assert_eq!(rows.len(), 5);
    assert!((rows[2][1] - (3.0 * rows[2][0].ln()).sin()).abs() < 1e-14);
    let (_, rows) = parse_csv(&ok(&["spring", "--config", &config, "--points", "7"], b""));
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[6][0], 10.0);

    let bad = write(dir.path(), "bad.json", r#"{"spec_version": 1, "colour": "red"}"#);
    assert_eq!(code(&["spring", "--config", &bad], b""), 2);
    let old = write(dir.path(), "old.json", r#"{"spec_version": 0}"#);
    assert_eq!(code(&["spring", "--config", &old], b""), 2);
    assert_eq!(code(&["spring", "--config", "/nonexistent/run.json"], b""), 2);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = run(&["spring", "--points", "9", "--output", path.to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), ok(&["spring", "--points", "9"], b""));

    let input = write(dir.path(), "in.csv", &ok(&["spring", "--points", "100"], b""));
    let report = dir.path().join("fit.json");
    ok(&["fit", &input, "--output", report.to_str().unwrap()], b"");
    let text = std::fs::read_to_string(report).unwrap();
    assert!(text.ends_with("}\n"));
    assert_eq!(text, ok(&["fit", &input], b""));
}

#[test]
fn check_suites() {
    let table = ok(&["check", "all"], b"");
    assert!(table.contains("0 failed"));
    let oscillator = ok(&["check", "oscillator"], b"");
    let rows = oscillator.lines().filter(|l| l.starts_with("oscillator")).count();
    assert!(rows >= 6, "{oscillator}");
    assert!(!oscillator.contains("FAIL"));
    assert_eq!(code(&["check", "nonsense"], b""), 2);
}

#[test]
fn entropy_report() {
    let report: serde_json::Value = serde_json::from_str(&ok(&["entropy", "--q", "2"], b"p\n0.25\n0.25\n0.25\n0.25\n")).unwrap();
    assert_eq!(report["tsallis"].as_f64(), Some(0.75));
    assert!((report["shannon"].as_f64().unwrap() - 4f64.ln()).abs() < 1e-15);
    assert_eq!(code(&["entropy", "--q", "2"], b"p\n0.5\n0.6\n"), 2);
    assert_eq!(code(&["entropy", "--q", "1"], b"p\n0.5\n0.5\n"), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&["spring", "--t-start", "0"], b""), 2);
    assert_eq!(code(&["spring", "--t-start", "-1"], b""), 2);
    assert_eq!(code(&["spring", "--t-start", "5", "--t-end", "2"], b""), 2);
    assert_eq!(code(&["spring", "--points", "0"], b""), 2);
    assert_eq!(code(&["simulate", "--tol", "1e-2"], b""), 2);
    assert_eq!(code(&["simulate", "--tol", "1e-15"], b""), 2);
    assert_eq!(code(&["fit"], b""), 2);
    assert_eq!(code(&["fit"], b"t,x\n1,0\n2,1\n"), 2);
    assert_eq!(code(&["fit"], b"t,x\n1,0\n2,abc\n"), 2);
    assert_eq!(code(&["fit", "--theta-min", "5", "--theta-max", "1"], b""), 2);
    assert_eq!(code(&["bogus"], b""), 2);
    assert_eq!(code(&["--help"], b""), 0);
}

#[test]
fn short_series_is_rejected() {
    let csv = ok(&["spring", "--points", "7"], b"");
    assert_eq!(code(&["fit"], csv.as_bytes()), 2);
    let csv = ok(&["spring", "--points", "8"], b"");
    assert_eq!(code(&["fit"], csv.as_bytes()), 0);
}
