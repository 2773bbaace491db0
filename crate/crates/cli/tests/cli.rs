use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reachdec::discretize::discretize;
use reachdec::linalg::read_matrix_market;
use reachdec::oracle::reach_nondecomposed;
use reachdec::reach::{reach, ReachOptions};
use reachdec_cli::{emit_tube, parse_csv, parse_scenario, tube_rows, Format};
use tempfile::TempDir;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn reachdec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachdec")).args(args).output().unwrap()
}

fn run(cmd: &str, scenario: &Path, out: &Path, extra: &[&str]) -> (i32, String, String) {
    let mut args = vec![cmd, "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = reachdec(&args);
    (
        o.status.code().unwrap(),
        String::from_utf8(o.stdout).unwrap(),
        String::from_utf8(o.stderr).unwrap(),
    )
}

const REST: &str = r#"{"A": [[0, 0], [0, 0]], "X0": {"box": {"low": [0, 0], "high": [1, 1]}},
    "delta": 0.1, "N": 10, "model": "discrete", "property": "x1 < 2"}"#;

#[test]
fn check_verifies_rest_system() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "rest.json", REST);
    let (code, stdout, stderr) = run("check", &sc, dir.path(), &[]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.trim(), "verified N=10");
}

#[test]
fn check_reports_uncertified_step_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "rest.json", &REST.replace("x1 < 2", "x1 + x2 <= 1.5"));
    let (code, stdout, _) = run("check", &sc, dir.path(), &[]);
    assert_eq!(code, 1);
    assert!(stdout.starts_with("not certified at k=0"), "{stdout}");
}

#[test]
fn rest_system_rows_are_identical() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "rest.json", &REST.replace("\"N\": 10", "\"N\": 3"));
    let (code, _, stderr) = run("reach", &sc, dir.path(), &[]);
    assert_eq!(code, 0, "{stderr}");
    let rows = parse_csv(&std::fs::read_to_string(dir.path().join("tube.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!((r.block, r.low.clone(), r.high.clone()), (0, vec![0.0, 0.0], vec![1.0, 1.0]));
    }
}

#[test]
fn row_count_is_steps_times_tracked_blocks() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"A": [[-1,0.2,0,0,0],[0,-1,0,0,0],[0,0,-2,1,0],[0,0,-1,-2,0],[0.5,0,0,0,-1]],
            "X0": {"box": {"center": [1, 1, 1, 1, 1], "radius": [0.1, 0.1, 0.1, 0.1, 0.1]}},
            "U": {"intervals": [[-0.1, 0.1], [0, 0], [0, 0], [0, 0], [-0.2, 0.2]]},
            "delta": 0.05, "N": 25, "model": "dense", "outputs": [1, 5]}"#,
    );
    let (code, _, stderr) = run("reach", &sc, dir.path(), &["--format", "both"]);
    assert_eq!(code, 0, "{stderr}");
    let rows = parse_csv(&std::fs::read_to_string(dir.path().join("tube.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 25 * 2);
    assert!(rows.iter().all(|r| r.block == 0 || r.block == 2));
    assert!(dir.path().join("block_0.svg").exists() && dir.path().join("block_2.svg").exists());
    assert!(!dir.path().join("block_1.svg").exists());
    assert!(!dir.path().join("tube.poly").exists());
}

#[test]
fn dense_rows_span_one_step() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "decay.json",
        r#"{"A": [[-1]], "X0": {"intervals": [[0.9, 1.1]]}, "delta": 0.125, "N": 40, "model": "dense"}"#,
    );
    let (code, _, stderr) = run("reach", &sc, dir.path(), &[]);
    assert_eq!(code, 0, "{stderr}");
    let rows = parse_csv(&std::fs::read_to_string(dir.path().join("tube.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 40);
    for r in &rows {
        assert!((r.t_hi - r.t_lo - 0.125).abs() < 1e-15, "{r:?}");
        assert_eq!(r.low.len(), 1);
    }
}

#[test]
fn decaying_upper_bounds_shrink_and_dominate_exact_supports() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "decay.json",
        r#"{"A": [[-1, 0], [0, -2]], "X0": {"box": {"low": [0.5, 0.5], "high": [1, 1]}},
            "delta": 0.05, "N": 60, "model": "dense"}"#,
    );
    let (code, _, stderr) = run("reach", &sc, dir.path(), &[]);
    assert_eq!(code, 0, "{stderr}");
    let rows = parse_csv(&std::fs::read_to_string(dir.path().join("tube.csv")).unwrap()).unwrap();

    let scenario = parse_scenario(&sc).unwrap();
    let disc = discretize(&scenario.system, scenario.delta, scenario.model, scenario.exp, scenario.steps).unwrap();
    let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let exact = reach_nondecomposed(&disc, scenario.steps, &dirs).unwrap();
    for (k, r) in rows.iter().enumerate() {
        for v in 0..2 {
            assert!(exact[k][v] <= r.high[v] + 1e-12, "k = {k}: {} > {}", exact[k][v], r.high[v]);
            if k >= 2 {
                assert!(r.high[v] <= rows[k - 1].high[v], "k = {k}: upper bound grew");
            }
        }
    }
}

#[test]
fn csv_round_trip_is_bitwise() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"A": [[-0.3, 1.7, 0.1], [-1.3, -0.2, 0], [0.4, 0, -0.9]],
            "X0": {"ball": {"center": [0.1, -1, 0.3], "radius": 0.37, "norm": 2}},
            "U": {"intervals": [[-0.013, 0.029], [0, 1e-3], [-1, 1]]},
            "delta": 0.0173, "N": 30, "model": "dense"}"#,
    );
    let scenario = parse_scenario(&sc).unwrap();
    let disc = discretize(&scenario.system, scenario.delta, scenario.model, scenario.exp, scenario.steps).unwrap();
    let tube = reach(&disc, &ReachOptions::new(scenario.steps)).unwrap();
    emit_tube(&tube, dir.path(), Format::Csv).unwrap();
    let back = parse_csv(&std::fs::read_to_string(dir.path().join("tube.csv")).unwrap()).unwrap();
    let rows = tube_rows(&tube).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!((a.k, a.block), (b.k, b.block));
        let bits = |r: &reachdec_cli::TubeRow| -> Vec<u64> {
            [r.t_lo, r.t_hi].iter().chain(&r.low).chain(&r.high).map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn epsilon_scheme_writes_polygon_sidecar() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "rot.json",
        r#"{"A": [[0, 1], [-1, 0]], "X0": {"box": {"low": [0.9, -0.1], "high": [1.1, 0.1]}},
            "delta": 0.1, "N": 5, "model": "discrete"}"#,
    );
    let (code, _, stderr) = run("reach", &sc, dir.path(), &["--scheme", "eps:0.01"]);
    assert_eq!(code, 0, "{stderr}");
    let poly = std::fs::read_to_string(dir.path().join("tube.poly")).unwrap();
    let mut lines = poly.lines();
    assert_eq!(lines.next(), Some("block,k,a1,a2,b"));
    // X(0) is already a box; later steps are rotated and become polygons.
    let ks: std::collections::BTreeSet<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ks.into_iter().collect::<Vec<_>>(), vec!["1", "2", "3", "4"]);
}

#[test]
fn compare_on_block_diagonal_system_has_no_decomposition_gap() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "bd.json",
        r#"{"A": [[-0.1, 1, 0, 0], [-1, -0.1, 0, 0], [0, 0, -0.5, 2], [0, 0, -2, -0.5]],
            "X0": {"box": {"center": [1, 0, 0, 1], "radius": [0.1, 0.1, 0.2, 0.05]}},
            "U": {"intervals": [[-0.1, 0.1], [0, 0], [0, 0.1], [-0.05, 0.05]]},
            "delta": 0.1, "N": 20, "model": "discrete"}"#,
    );
    let (code, stdout, stderr) = run("compare", &sc, dir.path(), &["--seed", "3"]);
    assert_eq!(code, 0, "{stderr}");
    let gap: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("max decomposition gap "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(gap <= 1e-9, "{stdout}");
    let table = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(table.lines().count(), 21);
}

#[test]
fn bounds_dominate_measured_gaps() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "coupled.json",
        r#"{"A": [[-1, 0.5, 0.2, 0], [0, -1, 0, 0.3], [0.1, 0, -2, 0.4], [0, 0.2, 0, -1.5]],
            "X0": {"box": {"center": [1, 0, 0, 1], "radius": [0.1, 0.1, 0.2, 0.05]}},
            "U": {"intervals": [[-0.1, 0.1], [0, 0], [0, 0.1], [-0.05, 0.05]]},
            "delta": 0.1, "N": 15, "model": "discrete"}"#,
    );
    let (code, stdout, stderr) = run("bounds", &sc, dir.path(), &[]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("single map: bound"), "{stdout}");
    let table = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    for line in table.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(f[2] <= f[1], "{line}");
    }
}

#[test]
fn discretize_writes_matrix_market_transition() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "a.mtx",
        "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.0\n2 1 -1.0\n",
    );
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"A": "a.mtx", "X0": {"point": [1, 0]}, "delta": 0.5, "N": 4, "model": "discrete"}"#,
    );
    let out = dir.path().join("out");
    let (code, _, stderr) = run("discretize", &sc, &out, &[]);
    assert_eq!(code, 0, "{stderr}");
    let phi = read_matrix_market(out.join("phi.mtx")).unwrap().to_dense();
    let (s, c) = 0.5f64.sin_cos();
    assert!((phi[(0, 0)] - c).abs() < 1e-14 && (phi[(0, 1)] - s).abs() < 1e-14);
    assert!(out.join("x0.csv").exists() && out.join("inputs.csv").exists());
}

#[test]
fn input_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "bad.json",
        r#"{"A": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]], "X0": {"point": [0, 0, 0]},
            "delta": 0.1, "N": 10, "model": "dense"}"#,
    );
    let (code, stdout, stderr) = run("reach", &sc, dir.path(), &[]);
    assert_eq!(code, 2);
    assert!(stdout.is_empty());
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error:cli:scenario:"), "{stderr}");

    let sc = write(dir.path(), "missing.json", r#"{"A": "nope.mtx", "X0": {"point": [0]}, "delta": 0.1, "N": 1, "model": "dense"}"#);
    let (code, _, stderr) = run("reach", &sc, dir.path(), &[]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error:linalg:io:"), "{stderr}");

    let (code, _, stderr) = run("check", &write(dir.path(), "np.json", &REST.replace(r#", "property": "x1 < 2""#, "")), dir.path(), &[]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error:cli:usage:"), "{stderr}");
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "blowup.json",
        r#"{"A": [[1000]], "X0": {"point": [1]}, "delta": 10, "N": 2, "model": "discrete"}"#,
    );
    let (code, _, stderr) = run("reach", &sc, dir.path(), &[]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.starts_with("error:linalg:non_finite:"), "{stderr}");
}
