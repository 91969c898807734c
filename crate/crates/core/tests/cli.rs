//! The `chsolver` binary: exit codes and files written.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chsolver"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = r#"
[grid]
n_nodes = 257
[initial]
kind = "gaussian"
amplitude = 0.5
width = 1.0
[controls]
dt = 0.02
t_end = 0.4
output_every = 5
"#;

#[test]
fn simulate_figure1_then_diagnose() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig1");
    let o = run(bin()
        .args(["--quiet", "simulate"])
        .arg(example("figure1.cfg"))
        .arg("--out")
        .arg(&out));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("timeseries.csv").is_file());
    assert!(out.join("meta.json").is_file());
    assert!(out.join("snapshot_0002.000000.csv").is_file());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["outcome"]["status"], "completed");

    let o = run(bin().arg("diagnose").arg(&out));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("all checks passed"));
}

#[test]
fn compare_single_peakon_passes() {
    let o = run(bin().arg("compare").arg(example("single_peakon.cfg")));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("max position error"));
    assert!(stdout.contains("PASS"));
}

#[test]
fn negative_lambda_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.cfg",
        &format!("[params]\nlambda = -1.0\n{SMALL}"),
    );
    let o = run(bin()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("run")));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));
}

#[test]
fn unknown_keys_and_usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "typo.cfg",
        &format!("{SMALL}\n[outputs]\nsnapshot = false\n"),
    );
    let o = run(bin().arg("simulate").arg(&cfg));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("snapshot"));
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let root = tmp.path().join("root");
    let o = run(bin()
        .args(["--quiet", "simulate"])
        .arg(&cfg)
        .env("CHSOLVER_OUT", &root));
    assert_eq!(o.status.code(), Some(0));
    assert!(root.join("small").join("timeseries.csv").is_file());
}

#[test]
fn diagnose_flags_broken_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("run");
    let o = run(bin()
        .args(["--quiet", "simulate"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let path = out.join("timeseries.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[2].split(',').map(String::from).collect();
    cells[6] = "-1.0".into(); // minQ
    lines[2] = cells.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = run(bin().arg("diagnose").arg(&out));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        run(bin().arg("diagnose").arg(tmp.path().join("missing")))
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn converge_writes_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("conv");
    let o = run(bin()
        .arg("converge")
        .arg(&cfg)
        .arg("--levels")
        .arg("3")
        .arg("--out")
        .arg(&out));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let table = std::fs::read_to_string(out.join("convergence.txt")).unwrap();
    assert!(table.starts_with("reference: finest"));
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn peakon_subcommand_writes_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ode");
    let o = run(bin()
        .arg("peakon")
        .arg(example("figure1.cfg"))
        .arg("--out")
        .arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(out.join("peakon.csv")).unwrap();
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        ["t", "p1", "q1"]
    );
    let last = rd.records().last().unwrap().unwrap();
    let t: f64 = last[0].parse().unwrap();
    let p: f64 = last[1].parse().unwrap();
    assert!((t - 2.0).abs() < 1e-12);
    assert!((p - 0.5 * (-2.0_f64).exp()).abs() < 1e-10);
}
