use std::path::Path;
use std::process::{Command, Output};

use elastinet_cli::io::{Cell, Table};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_elastinet"));
    c.env_remove("ELASTINET_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn identity_fixture_solution() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.csv", "1,0\n0,1\n");
    let y = write(dir.path(), "y.csv", "3\n1\n");
    for solver in ["rssn", "rfss", "ista"] {
        let out = run(&["solve", "--matrix", &k, "--data", &y, "--alpha", "1", "--beta", "1", "--solver", solver]);
        assert_eq!(out.status.code(), Some(0), "{solver}");
        let v = json(&out);
        // diagonal closed form: S_1(3)/(1+1) = 1, S_1(1) = 0
        let x: Vec<f64> = serde_json::from_value(v["solution"].clone()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && x[1] == 0.0, "{solver}: {x:?}");
        assert_eq!(v["status"], "Converged");
        assert_eq!(v["active_set_size"], 1);
        for field in ["iterations", "objective", "kkt_residual_norm", "wall_time_ms"] {
            assert!(v[field].is_number(), "{field}");
        }
    }
}

#[test]
fn above_threshold_gives_zero() {
    let out = run(&["solve", "--generate", "gaussian", "--m", "20", "--s", "20", "--alpha", "1e3", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let x: Vec<f64> = serde_json::from_value(v["solution"].clone()).unwrap();
    assert!(x.iter().all(|&xi| xi == 0.0));
    assert!(v["iterations"].as_u64().unwrap() <= 1);
}

#[test]
fn csv_solution_output() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.csv", "2,0\n0,2\n");
    let y = write(dir.path(), "y.csv", "4\n0\n");
    let dest = dir.path().join("x.csv");
    let out = run(&[
        "solve", "--matrix", &k, "--data", &y, "--alpha", "0", "--beta", "1",
        "--format", "csv", "--out", dest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let x = elastinet_cli::io::read_vector(&dest).unwrap();
    // (KᵀK + I) x = Kᵀy: 5 x₀ = 8
    assert!((x[0] - 1.6).abs() < 1e-12);
    assert_eq!(x[1], 0.0);
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.csv", "1,0\n0,abc\n");
    let y = write(dir.path(), "y.csv", "3\n1\n");
    let out = run(&["solve", "--matrix", &k, "--data", &y, "--alpha", "1", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");

    let ragged = write(dir.path(), "r.csv", "1,0\n0,1\n1\n");
    let out = run(&["solve", "--matrix", &ragged, "--data", &y, "--alpha", "1", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["solve", "--generate", "gaussian"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--generate", "gaussian", "--alpha", "1", "--beta", "-1"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.csv", "1,0\n0,1\n");
    let y = write(dir.path(), "y.csv", "3\n1\n4\n");
    let out = run(&["solve", "--matrix", &k, "--data", &y, "--alpha", "1", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["test4", "--help"]).status.code(), Some(0));
}

#[test]
fn solver_failure_exits_two_and_still_writes_record() {
    let out = run(&[
        "solve", "--generate", "gaussian", "--m", "40", "--s", "40", "--alpha", "1e-5",
        "--beta", "1e-6", "--solver", "ista", "--max-iter", "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["status"], "MaxIterations");
    assert_eq!(v["iterations"], 3);
}

fn table_stdout(args: &[&str], seed: &str) -> Table {
    let out = bin().args(args).env("ELASTINET_SEED", seed).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    Table::read_csv(out.stdout.as_slice()).unwrap()
}

fn without_timing(t: &Table) -> Vec<Vec<Cell>> {
    t.rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&t.header)
                .filter(|(_, h)| !h.ends_with("_ms"))
                .map(|(c, _)| c.clone())
                .collect()
        })
        .collect()
}

#[test]
fn test1_columns_and_determinism() {
    let args = ["test1", "--m", "40", "--s", "40", "--repeats", "2", "--betas", "0,2^-30,2^-12"];
    let a = table_stdout(&args, "5");
    let b = table_stdout(&args, "5");
    assert_eq!(
        a.header,
        ["beta", "active_size", "rel_error", "rfss_iters", "rfss_ms", "rssn_iters", "rssn_ms"]
    );
    assert_eq!(without_timing(&a), without_timing(&b));
    assert_eq!(a.rows[0][3], Cell::Missing);

    // seed flag wins over the environment variable
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "5"]);
    let c = table_stdout(&with_flag, "999");
    assert_eq!(without_timing(&a), without_timing(&c));
    let d = table_stdout(&args, "6");
    assert_ne!(without_timing(&a), without_timing(&d));
}

#[test]
fn test2_rank_deficient_rows() {
    let t = table_stdout(&["test2", "--m", "40", "--s", "40", "--betas", "2^-16"], "0");
    assert_eq!(t.rows.len(), 1);
    assert!(t.rows[0].iter().all(|c| *c != Cell::Missing));
}

#[test]
fn test3_reports_data_error() {
    let t = table_stdout(&["test3", "--m", "40", "--s", "40"], "0");
    assert_eq!(
        t.header,
        ["beta", "active_size", "rel_error", "e_Kx", "rfss_iters", "rfss_ms", "rssn_iters", "rssn_ms"]
    );
    assert_eq!(t.rows.len(), 5);
}

#[test]
fn json_tables_carry_solver() {
    let out = run(&["test1", "--m", "30", "--s", "30", "--betas", "0,2^-20", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v[0]["solver"], "ista");
    assert_eq!(v[1]["solver"], "rfss+rssn");
    assert!(v[0]["rfss_iters"].is_null());
}

#[test]
fn test4_emits_points_and_slopes() {
    let out = run(&["test4", "--n", "8", "--band", "3", "--deltas", "1e-2,1e-3,1e-4,1e-5", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["points"].as_array().unwrap().len(), 16);
    assert_eq!(v["slopes"].as_array().unwrap().len(), 4);
    assert!((v["split"].as_f64().unwrap() - 10f64.powf(-3.5)).abs() < 1e-15);
}

#[test]
fn discrepancy_identity_root() {
    // K = I, y = (1, 0), δ = 0.5: x = y/(1+β) so the residual β/(1+β) hits δ at β = 1
    let dir = tempfile::tempdir().unwrap();
    let k = write(dir.path(), "k.csv", "1,0\n0,1\n");
    let y = write(dir.path(), "y.csv", "1\n0\n");
    let out = run(&["discrepancy", "--matrix", &k, "--data", &y, "--delta", "0.5", "--eta", "1e-9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let beta = v["beta"].as_f64().unwrap();
    assert!((beta - 1.0).abs() < 1e-5, "{beta}");
}
