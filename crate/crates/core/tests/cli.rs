use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn clequil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clequil"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scan(dir: &Path, config: &str) -> Output {
    let path = dir.join("scan.cfg");
    fs::write(&path, config).unwrap();
    clequil(&[
        "scan",
        path.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,d,gamma,c,value,err_estimate"));
    lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn empty_axis_is_a_usage_error_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let o = scan(
        dir.path(),
        "quantity = zratio\ntheta = 1\nd = log:1:10:0\ngamma = 0.1\n",
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_quantity_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = scan(
        dir.path(),
        "quantity = heat\ntheta = 1\nd = 1\ngamma = 0.1\n",
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown quantity"));
    let o = clequil(&[
        "point", "heat", "--theta", "1", "--d", "1", "--gamma", "0.1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = clequil(&["scan", "/nonexistent/scan.cfg"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn negativity_grid_vanishes_at_high_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let o = scan(
        dir.path(),
        "quantity = negativity\nc = 0.1\ngamma = 0.005\ntheta = log:0.1:100:30\nd = log:1:100:30\n",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = rows(&dir.path().join("out/negativity.csv"));
    assert_eq!(rows.len(), 900);
    assert!(rows.iter().any(|r| r[4] > 0.0));
    for r in rows.iter().filter(|r| r[0] > 5.0) {
        assert_eq!(r[4], 0.0, "theta={} d={}", r[0], r[1]);
    }
}

#[test]
fn partition_ratio_grid_is_accurate() {
    for (q, theta) in [
        ("zratio", "log:0.01:1000:30"),
        ("entropy", "log:0.1:1000:30"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = format!("quantity = {q}\ngamma = 1\ntheta = {theta}\nd = log:0.1:1000:30\n");
        let o = scan(dir.path(), &cfg);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let rows = rows(&dir.path().join(format!("out/{q}.csv")));
        assert_eq!(rows.len(), 900);
        for r in &rows {
            assert!(r[5] < 1e-8, "{q}: {r:?}");
            assert!(q != "zratio" || r[4] <= 0.0, "{r:?}");
        }
        assert!(dir.path().join("out/manifest.json").is_file());
    }
}

#[test]
fn entropy_ratio_below_canonical_underflow_is_an_accuracy_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = scan(
        dir.path(),
        "quantity = entropy\ngamma = 1\ntheta = 0.005\nd = 10\n",
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("underflows"));
}

#[test]
fn uncoupled_pair_has_no_negativity() {
    let o = clequil(&[
        "point",
        "negativity",
        "--theta",
        "0.1",
        "--d",
        "10",
        "--gamma",
        "0.1",
        "--c",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["value"], 0.0);
}

#[test]
fn point_matches_the_oracle() {
    let o = clequil(&[
        "point",
        "zratio",
        "--theta",
        "1",
        "--d",
        "5",
        "--gamma",
        "0.5",
        "--oracle-n",
        "4000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert!(v["oracle_gap"].as_f64().unwrap() < 1e-3, "{v}");
}

#[test]
fn high_temperature_variance_is_classical() {
    let o = clequil(&[
        "point", "qvar", "--theta", "1000", "--d", "10", "--gamma", "0.1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o)["value"].as_f64().unwrap();
    assert!((v / 1000.0 - 1.0).abs() < 1e-3, "{v}");
}

#[test]
fn bound_reports_vanishing_functional() {
    let o = clequil(&[
        "bound", "--theta", "0.5,2", "--d", "5", "--gamma", "0.1", "--l", "12",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r["modulus"].as_f64().unwrap() <= 1e-12 * r["scale"].as_f64().unwrap().max(1e-300));
    }
}
