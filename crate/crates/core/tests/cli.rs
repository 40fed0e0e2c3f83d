use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qmoments(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmoments")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUARTIC: &str = "[model]\nhbar = 1e-3\nu_coeffs = [0.0, 0.0, 0.0, 0.0, 0.041666666666666664]\n";

#[test]
fn verify_passes_every_check() {
    let o = qmoments(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().count() > 40);
    for line in out.lines() {
        assert!(line.starts_with("CHECK ") && line.contains(" PASS value="), "{line}");
        assert!(line.contains(" threshold="), "{line}");
    }
    assert!(out.contains("CHECK a_prime_2 PASS value=0e0 threshold=0e0"));
}

#[test]
fn verify_suites_can_be_selected() {
    let o = qmoments(&["verify", "coefficients"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("residual_"));
    let o = qmoments(&["verify", "adiabatic", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("residual_constraint4 PASS"));
}

#[test]
fn coefficient_tables_are_printed_exactly() {
    let o = qmoments(&["coefficients", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("A'[2]=1/16"), "{out}");
    assert!(out.contains("B'[2]=-5/16"), "{out}");
    let o = qmoments(&["coefficients", "--n", "5"]);
    assert!(stdout(&o).contains("D[0,5]="));
    assert_eq!(qmoments(&["coefficients", "--n", "40"]).status.code(), Some(1));
}

#[test]
fn hierarchy_csv_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "h.toml", &format!("{QUARTIC}[run]\nt_end = 3.0\ntruncation = 4\n"));
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let o = qmoments(&["hierarchy", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(&out_a).unwrap();
    assert_eq!(a, std::fs::read(&out_b).unwrap());
    let text = String::from_utf8(a).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,q,p,G_0_2,G_1_2,G_2_2,G_0_3,"), "{header}");
    assert!(header.ends_with(",HQ,uncertainty,X"));
    // 17 significant digits in scientific notation
    let first = text.lines().nth(1).unwrap();
    let q = first.split(',').nth(1).unwrap();
    assert_eq!(q, "1.0000000000000000e0");
}

#[test]
fn effective_run_writes_reconstructed_second_moment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "e.toml", &format!("{QUARTIC}[run]\nt_end = 2.0\n[output]\npath = \"{}\"\n",
        dir.path().join("e.csv").display()));
    let o = qmoments(&["effective", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,q,p,G_0_2,HQ,uncertainty,X");
}

#[test]
fn crossing_the_stiffness_zero_exits_with_the_failure_time() {
    let dir = TempDir::new().unwrap();
    // X = 1 - q^2/2 vanishes at q = sqrt(2)
    let cfg = write(&dir, "x.toml",
        "[model]\nhbar = 1e-3\nu_coeffs = [0.0, 0.0, 0.0, 0.0, -0.041666666666666664]\n[run]\nq0 = 1.0\np0 = 1.0\nt_end = 5.0\n");
    let o = qmoments(&["hierarchy", "--config", &cfg, "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("integration failed at t = "), "{err}");
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let odd = write(&dir, "odd.toml", &format!("{QUARTIC}[run]\nt_end = 1.0\ntruncation = 3\n"));
    let o = qmoments(&["hierarchy", "--config", &odd]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("run.truncation"));

    let quad = write(&dir, "quad.toml", "[model]\nhbar = 1.0\nu_coeffs = [0.0, 0.0, 1.0]\n[run]\nt_end = 1.0\n");
    let o = qmoments(&["effective", "--config", &quad]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("model.u_coeffs"));

    let compare = write(&dir, "c.toml", &format!("{QUARTIC}[run]\nt_end = 1.0\n"));
    assert_eq!(qmoments(&["compare", "--config", &compare]).status.code(), Some(3));
    assert_eq!(qmoments(&["hierarchy", "--config", "/nonexistent/run.toml"]).status.code(), Some(3));
    assert_eq!(qmoments(&["hierarchy"]).status.code(), Some(3));
}

#[test]
fn compare_reports_metric_value_and_slope() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "h.toml", &format!("{QUARTIC}[run]\nt_end = 2.0\n"));
    let csv = dir.path().join("h.csv");
    assert_eq!(qmoments(&["hierarchy", "--config", &cfg, "--out", csv.to_str().unwrap()]).status.code(), Some(0));

    let files = write(&dir, "files.toml", &format!(
        "{QUARTIC}[run]\ninputs = [\"{0}\", \"{0}\"]\nmetric = \"l2\"\n", csv.display()));
    let o = qmoments(&["compare", "--config", &files]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "l2,0.0000000000000000e0,nan");

    let sweep = write(&dir, "sweep.toml", &format!(
        "{QUARTIC}[run]\nt_end = 6.0\nsweep = [1e-3, 2e-3, 4e-3]\nworkers = 2\n"));
    let o = qmoments(&["compare", "--config", &sweep]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    let fields: Vec<&str> = line.trim().split(',').collect();
    assert_eq!(fields.len(), 3);
    assert_eq!(fields[0], "sup");
    let value: f64 = fields[1].parse().unwrap();
    let slope: f64 = fields[2].parse().unwrap();
    assert!(value > 0.0 && slope.is_finite());
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(qmoments(&["--help"]).status.code(), Some(0));
    assert!(Path::new(env!("CARGO_BIN_EXE_qmoments")).exists());
}
