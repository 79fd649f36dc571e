use std::path::Path;
use std::process::{Command, Output};

use blockpr::{correlation_measure, build_deterministic_masks, gaussian_signal, global_phase_align, Signal};
use blockpr_cli::io::{read_signal, write_measurements, write_signal, FileFormat};
use blockpr_cli::report::COLUMNS;

fn blockpr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockpr")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(name: &str) -> usize {
    COLUMNS.iter().position(|c| *c == name).unwrap()
}

fn without_timing(csv: &str) -> Vec<Vec<String>> {
    let t = column("solve_seconds");
    csv.lines()
        .map(|l| {
            let mut cells: Vec<String> = l.split(',').map(String::from).collect();
            if cells.len() == COLUMNS.len() {
                cells[t].clear();
            }
            cells
        })
        .collect()
}

const GRID: [&str; 10] = ["robustness", "--d", "32,48", "--delta", "4", "--snr", "20,inf", "--trials", "4", "--flatten"];

#[test]
fn runs_are_reproducible_apart_from_timing() {
    let a = stdout(&blockpr(&[&GRID[..], &["--seed", "5"]].concat()));
    let b = stdout(&blockpr(&[&GRID[..], &["--seed", "5"]].concat()));
    let c = stdout(&blockpr(&[&GRID[..], &["--seed", "6"]].concat()));
    assert_eq!(without_timing(&a), without_timing(&b));
    assert_ne!(without_timing(&a), without_timing(&c));
}

#[test]
fn aggregate_rows_match_trial_rows() {
    let csv = stdout(&blockpr(&[&GRID[..], &["--seed", "1"]].concat()));
    let rows: Vec<Vec<&str>> = csv.lines().skip(2).map(|l| l.split(',').collect()).collect();
    let (trial, snr, d, err) = (column("trial"), column("snr_db"), column("d"), column("error_db"));
    let trials: Vec<_> = rows.iter().filter(|r| r[trial].parse::<usize>().is_ok()).collect();
    let means: Vec<_> = rows.iter().filter(|r| r[trial] == "mean").collect();
    assert_eq!(trials.len(), 2 * 2 * 4);
    assert_eq!(means.len(), 4);
    for m in means {
        let vals: Vec<f64> = trials
            .iter()
            .filter(|r| r[snr] == m[snr] && r[d] == m[d])
            .map(|r| r[err].parse().unwrap())
            .collect();
        assert_eq!(vals.len(), 4);
        let expected = vals.iter().sum::<f64>() / 4.0;
        let got: f64 = m[err].parse().unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.abs());
    }
}

#[test]
fn json_output_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("condno.json");
    let o = blockpr(&["condno", "--delta", "2,3,8", "--trials", "1", "--json", "--out", path.to_str().unwrap()]);
    assert!(stdout(&o).is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["schema"], "blockpr-results/1");
    let kappas: Vec<f64> = v["trials"].as_array().unwrap().iter().map(|t| t["kappa"].as_f64().unwrap()).collect();
    assert_eq!(kappas.len(), 3);
    assert!((kappas[0] - 4.082988165073598).abs() < 1e-12);
    assert!(kappas.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn verify_passes_and_detects_perturbation() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&blockpr(&["verify", "--json"]))).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 8);
    let bad = blockpr(&["verify", "--perturb", "1.0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("failed"));
}

fn recovered_error(x: &Signal, path: &Path) -> f64 {
    let z = read_signal(path, FileFormat::from_path(path)).unwrap();
    global_phase_align(x, &z).unwrap().relative_l2().unwrap()
}

#[test]
fn recover_signal_files() {
    let dir = tempfile::tempdir().unwrap();
    let x = gaussian_signal(40, 3);
    for (input, output) in [("x.bin", "z.csv"), ("x.csv", "z.bin")] {
        let (input, output) = (dir.path().join(input), dir.path().join(output));
        write_signal(&input, FileFormat::from_path(&input), &x).unwrap();
        let o = blockpr(&[
            "recover", "--input", input.to_str().unwrap(), "--output", output.to_str().unwrap(),
            "--delta", "5", "--flatten", "--json",
        ]);
        let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!(summary["rel_error"].as_f64().unwrap() < 1e-10);
        assert!(recovered_error(&x, &output) < 1e-10);
    }
}

#[test]
fn recover_measurement_file() {
    let dir = tempfile::tempdir().unwrap();
    let x = gaussian_signal(30, 8);
    let b = correlation_measure(&x, &build_deterministic_masks(30, 4, None).unwrap()).unwrap();
    let input = dir.path().join("b.csv");
    let output = dir.path().join("z.csv");
    write_measurements(&input, FileFormat::Csv, b.entries()).unwrap();
    let args = ["recover", "--input", input.to_str().unwrap(), "--kind", "measurements", "--output", output.to_str().unwrap(), "--delta", "4"];
    let missing_d = blockpr(&args);
    assert_eq!(missing_d.status.code(), Some(2));
    let wrong_d = blockpr(&[&args[..], &["--d", "31"]].concat());
    assert_eq!(wrong_d.status.code(), Some(2));
    let text = stdout(&blockpr(&[&args[..], &["--d", "30"]].concat()));
    assert!(text.starts_with("recovered d=30"));
    assert!(recovered_error(&x, &output) < 1e-10);
}

#[test]
fn invalid_configurations_fail_with_a_message() {
    for args in [
        &["robustness", "--d", "3"][..],
        &["robustness", "--snr", "loud"],
        &["runtime", "--trials", "0"],
        &["condno", "--masks", "fancy"],
        &["flatness", "--d", "100", "--m", "0"],
        &["teleport"],
        &["recover", "--input", "/nonexistent/x.bin", "--output", "/tmp/never.bin"],
    ] {
        let o = blockpr(args);
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(!o.stderr.is_empty(), "{args:?} printed nothing");
    }
}

#[test]
fn sparse_uses_inner_default_width() {
    let csv = stdout(&blockpr(&["sparse", "--d", "256", "--trials", "2"]));
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[column("delta")], "15");
    assert_eq!(row[column("m")], "64");
    assert_eq!(row[column("status")], "ok");
    let csv = stdout(&blockpr(&["sparse", "--d", "256", "--trials", "1", "--delta", "9"]));
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[column("delta")], "9");
}
