//! Runs the `normspec` binary on small problems.

use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use normspec::geometry::read_cloud_csv;
use normspec::problems::{generate_clouds, preset};

const SMALL_SPHERE: &str = "preset = \"sphere-lb\"\n\
[problem]\n\
n_interior = 40\n\
candidate_multiplier = 10\n\
[problem.basis_spec]\n\
max_index = 5\n\
[scan]\n\
lambda_min = 0.5\n\
lambda_max = 7.0\n\
steps = 14\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normspec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL_SPHERE).unwrap();
    path.display().to_string()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn scan_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for out in ["a", "b"] {
        let o = run(dir.path(), &["scan", "--config", &cfg, "--seed", "3", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |p: &str| fs::read_to_string(dir.path().join(p)).unwrap();
    let csv = read("a/scan.csv");
    assert_eq!(csv, read("b/scan.csv"));
    assert_eq!(read("a/scan.svg"), read("b/scan.svg"));
    assert!(csv.starts_with(&format!("# normspec {} scan\n", env!("CARGO_PKG_VERSION"))));
    assert!(csv.contains("# seed = 3\n"));
    assert!(csv.contains("lambda,norm_sq,dnorm_sq,factorization_ok\n"));
    assert_eq!(data_rows(&csv).len(), 14);
    assert!(read("a/scan.svg").contains("<polyline"));
}

#[test]
fn header_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(dir.path(), &["scan", "--config", &cfg, "--seed", "5", "--out", "a"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("a/scan.csv")).unwrap();
    let echo: String = csv
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| !l.starts_with("normspec ") && !l.starts_with("from preset"))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(dir.path().join("echo.toml"), echo).unwrap();
    let o = run(dir.path(), &["scan", "--config", "echo.toml", "--out", "b"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = fs::read_to_string(dir.path().join("b/scan.csv")).unwrap();
    assert_eq!(data_rows(&csv), data_rows(&again));
}

#[test]
fn newton_writes_one_row_per_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(dir.path(), &["newton", "--config", &cfg, "--starts", "1.5,5.5", "--workers", "2", "--out", "n"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("n/newton.csv")).unwrap();
    assert!(csv.contains("lambda0,lambda_star,norm_sq,iterations,converged,stagnated,is_minimum\n"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("1.5,"));
    assert!(rows[1].starts_with("5.5,"));
}

#[test]
fn multiplicity_and_eigenfunction_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(
        dir.path(),
        &["multiplicity", "--config", &cfg, "--lambda", "2", "--anchors", "1,2", "--n1", "30", "--n2", "36", "--out", "m"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("m/multiplicity.csv")).unwrap();
    assert!(csv.contains("lambda,n_anchors,n1,n2,norm_sq1,norm_sq2,ratio,verdict\n"));
    assert_eq!(data_rows(&csv).len(), 2);

    let o = run(dir.path(), &["eigenfunction", "--config", &cfg, "--lambda", "2", "--out", "e"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("e/eigenfunction.csv")).unwrap();
    assert!(csv.contains("x,y,z,re,im\n"));
    assert!(csv.contains("# max constraint residual = "));
    assert_eq!(data_rows(&csv).len(), 40);
}

#[test]
fn cloud_round_trips_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["cloud", "--preset", "genus2-lb-kappa", "--seed", "2", "--out", "c"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut spec = preset("genus2-lb-kappa").unwrap();
    spec.seed = 2;
    let expected = generate_clouds(&spec).unwrap();
    let file = fs::File::open(dir.path().join("c/interior.csv")).unwrap();
    let read = read_cloud_csv(BufReader::new(file)).unwrap();
    assert_eq!(read, expected.interior);
    assert!(read.curvature.is_some());
    assert!(!dir.path().join("c/boundary.csv").exists());
    assert!(dir.path().join("c/anchors.csv").exists());
}

#[test]
fn config_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(dir.path(), args).status.code();
    assert_eq!(code(&["scan", "--preset", "no-such-preset"]), Some(1));
    assert_eq!(code(&["scan", "--config", "missing.toml"]), Some(1));
    assert_eq!(code(&["scan"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    fs::write(dir.path().join("bad.toml"), "preset = \"sphere-lb\"\n[problem]\nn_anchors = 0\n").unwrap();
    assert_eq!(code(&["cloud", "--config", "bad.toml"]), Some(1));
    assert_eq!(code(&["--version"]), Some(0));
}
