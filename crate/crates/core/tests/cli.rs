use std::path::Path;
use std::process::{Command, Output};

use gendyn::harness::{matrix_to_csv, Table};
use nalgebra::DMatrix;

fn gendyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gendyn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn header(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    Table::from_csv(&text).unwrap().columns().to_vec()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn theory_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "[curve]\npoints = 20\n");
    let out = dir.path().join("curve.csv");
    let o = gendyn(&["theory", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&out), ["t_over_tau", "eps_train", "eps_test"]);
}

#[test]
fn simulate_writes_trace_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"teacher": {"snrs": [4.0, 2.0], "n1": 30, "n3": 15}, "training": {"t_max": 3.0, "record_points": 10}}"#,
    );
    let out = dir.path().join("trace.csv");
    let o = gendyn(&["simulate", "--config", &cfg, "--seed", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        header(&out),
        ["t_over_tau", "eps_train", "eps_test", "s_1", "s_2", "align_u_1", "align_u_2", "align_v_1", "align_v_2"]
    );
}

#[test]
fn shrink_round_trips_matrix_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = DMatrix::zeros(2, 4);
    m[(0, 0)] = 10.0;
    let input = write(dir.path(), "in.csv", &matrix_to_csv(&m));
    let out = dir.path().join("out.csv");
    let report = dir.path().join("report.csv");
    let o = gendyn(&[
        "shrink",
        "--input",
        &input,
        "--aspect",
        "0.5",
        "--out",
        out.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# rows=2 cols=4"));
    assert_eq!(header(&report), ["mode", "shat", "sbar", "shrunk"]);
}

#[test]
fn transfer_grid_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = gendyn(&["transfer", "--snr-a", "3", "--snr-b", "2", "--q", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&out), ["q", "snr_a", "snr_b", "T_theory", "T_sim", "ci"]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    let bad = write(dir.path(), "bad.toml", "[teacher]\nn1 = \"many\"\n");
    assert_eq!(gendyn(&["theory", "--config", &bad, "--out", out]).status.code(), Some(2));
    let invalid = write(dir.path(), "inv.toml", "[student]\ndepth = 1\n");
    assert_eq!(gendyn(&["simulate", "--config", &invalid, "--out", out]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        gendyn(&["theory", "--config", missing.to_str().unwrap(), "--out", out]).status.code(),
        Some(2)
    );
    assert_eq!(gendyn(&["reproduce", "fig99", "--outdir", out]).status.code(), Some(2));
    assert_eq!(gendyn(&["transfer", "--snr-a", "3", "--q", "2", "--out", out]).status.code(), Some(2));
    assert_eq!(gendyn(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.toml",
        "[teacher]\nn1 = 20\nn3 = 10\n[student]\ninit = \"random\"\n[training]\nlearning_rate = 5.0\nt_max = 500.0\n",
    );
    let out = dir.path().join("x.csv");
    let o = gendyn(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}
